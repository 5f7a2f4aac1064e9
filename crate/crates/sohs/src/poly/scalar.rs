use super::coeff::{f64_to_rat_exact, Coeff, Rat};
use super::monomial::Monomial;
use std::collections::BTreeMap;

/// Scalar polynomial in `nvars` variables with coefficients in `C`.
///
/// Terms are stored in a sorted map keyed by monomial; zero coefficients are
/// never stored, so `==` is mathematical equality and iteration order is the
/// graded-lex order of the monomials.
#[derive(Clone, PartialEq, Debug)]
pub struct ScalarPoly<C: Coeff> {
    nvars: usize,
    terms: BTreeMap<Monomial, C>,
}

impl<C: Coeff> ScalarPoly<C> {
    pub fn zero(nvars: usize) -> Self {
        ScalarPoly { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: C) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(Monomial::one(nvars), c);
        p
    }

    pub fn one(nvars: usize) -> Self {
        Self::constant(nvars, C::one())
    }

    /// The variable `Xi` as a polynomial.
    pub fn var(nvars: usize, i: usize) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(Monomial::var(nvars, i), C::one());
        p
    }

    pub fn term(nvars: usize, m: Monomial, c: C) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(m, c);
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree; zero polynomial reports 0.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|m| m.degree()).max().unwrap_or(0)
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &C)> {
        self.terms.iter()
    }

    pub fn coeff(&self, m: &Monomial) -> C {
        self.terms.get(m).cloned().unwrap_or_else(C::zero)
    }

    /// Add `c * m` into the polynomial, keeping canonical form.
    pub fn add_term(&mut self, m: Monomial, c: C) {
        assert_eq!(m.nvars(), self.nvars, "monomial arity differs from polynomial");
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let sum = e.get().clone() + c;
                if sum.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = sum;
                }
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.nvars, other.nvars, "variable counts differ");
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        let terms = self.terms.iter().map(|(m, c)| (m.clone(), -c.clone())).collect();
        ScalarPoly { nvars: self.nvars, terms }
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.nvars, other.nvars, "variable counts differ");
        let mut out = Self::zero(self.nvars);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                out.add_term(ma.mul(mb), ca.clone() * cb.clone());
            }
        }
        out
    }

    pub fn scale(&self, c: &C) -> Self {
        if c.is_zero() {
            return Self::zero(self.nvars);
        }
        let terms = self
            .terms
            .iter()
            .map(|(m, v)| (m.clone(), v.clone() * c.clone()))
            .collect();
        ScalarPoly { nvars: self.nvars, terms }
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut out = Self::one(self.nvars);
        for _ in 0..e {
            out = out.mul(self);
        }
        out
    }

    pub fn square(&self) -> Self {
        self.mul(self)
    }

    pub fn eval(&self, x: &[C]) -> C {
        assert_eq!(x.len(), self.nvars, "evaluation point has wrong arity");
        let mut acc = C::zero();
        for (m, c) in &self.terms {
            acc = acc + c.clone() * m.eval(x);
        }
        acc
    }

    pub fn map_coeff<D: Coeff>(&self, f: impl Fn(&C) -> D) -> ScalarPoly<D> {
        let mut out = ScalarPoly::zero(self.nvars);
        for (m, c) in &self.terms {
            out.add_term(m.clone(), f(c));
        }
        out
    }

    pub fn to_f64_poly(&self) -> ScalarPoly<f64> {
        self.map_coeff(|c| c.to_f64())
    }

    /// Largest coefficient magnitude (0 for the zero polynomial).
    pub fn max_abs_coeff(&self) -> f64 {
        self.terms
            .values()
            .map(|c| c.to_f64().abs())
            .fold(0.0, f64::max)
    }
}

impl ScalarPoly<f64> {
    /// Exact lift to rationals: each f64 coefficient is itself a rational.
    pub fn to_rat_exact(&self) -> ScalarPoly<Rat> {
        self.map_coeff(|c| f64_to_rat_exact(*c))
    }
}

impl ScalarPoly<Rat> {
    /// Same polynomial with every coefficient multiplied out to clear
    /// denominators, divided by the gcd of the numerators: the primitive
    /// integer form. Sign is preserved. Used only for deduplication keys.
    pub fn primitive_part(&self) -> ScalarPoly<Rat> {
        use num::{BigInt, One, Signed, Zero};
        if self.is_zero() {
            return self.clone();
        }
        let mut den_lcm = BigInt::one();
        for c in self.terms.values() {
            den_lcm = num::integer::lcm(den_lcm, c.denom().clone());
        }
        let mut num_gcd = BigInt::zero();
        for c in self.terms.values() {
            let scaled = c.numer() * (&den_lcm / c.denom());
            num_gcd = num::integer::gcd(num_gcd, scaled.abs());
        }
        let factor = Rat::new(den_lcm, num_gcd);
        self.scale(&factor)
    }
}

impl<C: Coeff> std::fmt::Display for ScalarPoly<C> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, c) in self.terms.iter().rev() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            if m.is_one() {
                write!(f, "{}", c)?;
            } else if *c == C::one() {
                write!(f, "{}", m)?;
            } else {
                write!(f, "{}*{}", c, m)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::super::coeff::{rat, rat_int};
    use super::*;

    fn x() -> ScalarPoly<Rat> {
        ScalarPoly::var(1, 0)
    }

    #[test]
    fn square_of_binomial_expands() {
        // (X + 1)^2 = X^2 + 2X + 1
        let p = x().add(&ScalarPoly::one(1));
        let sq = p.square();
        assert_eq!(sq.coeff(&Monomial::from_exponents(vec![2])), rat_int(1));
        assert_eq!(sq.coeff(&Monomial::from_exponents(vec![1])), rat_int(2));
        assert_eq!(sq.coeff(&Monomial::from_exponents(vec![0])), rat_int(1));
        assert_eq!(sq.num_terms(), 3);
    }

    #[test]
    fn difference_of_squares() {
        // (X1 + X2)(X1 - X2) = X1^2 - X2^2
        let x1: ScalarPoly<Rat> = ScalarPoly::var(2, 0);
        let x2: ScalarPoly<Rat> = ScalarPoly::var(2, 1);
        let prod = x1.add(&x2).mul(&x1.sub(&x2));
        let mut expect = ScalarPoly::zero(2);
        expect.add_term(Monomial::from_exponents(vec![2, 0]), rat_int(1));
        expect.add_term(Monomial::from_exponents(vec![0, 2]), rat_int(-1));
        assert_eq!(prod, expect);
    }

    #[test]
    fn cancellation_leaves_no_zero_terms() {
        let p = x().mul(&x()).add(&x());
        let d = p.sub(&p);
        assert!(d.is_zero());
        assert_eq!(d.num_terms(), 0);
    }

    #[test]
    fn exact_evaluation_at_rationals() {
        // p = X^2 - 1/2 at X = 3/2 gives 9/4 - 1/2 = 7/4.
        let p = x().square().sub(&ScalarPoly::constant(1, rat(1, 2)));
        assert_eq!(p.eval(&[rat(3, 2)]), rat(7, 4));
    }

    #[test]
    fn primitive_part_clears_denominators() {
        let p = x().scale(&rat(2, 3)).add(&ScalarPoly::constant(1, rat(4, 3)));
        let prim = p.primitive_part();
        assert_eq!(prim.coeff(&Monomial::from_exponents(vec![1])), rat_int(1));
        assert_eq!(prim.coeff(&Monomial::from_exponents(vec![0])), rat_int(2));
    }
}
