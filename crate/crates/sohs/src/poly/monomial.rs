use super::Coeff;
use std::cmp::Ordering;

/// Exponent vector of a power product `X1^e1 * .. * Xn^en`.
///
/// Ordered graded-lexicographically: first by total degree, then
/// lexicographically on the exponent vector. This order is fixed once and
/// used everywhere (term maps, SDP constraint enumeration, JSON output), so
/// identical inputs always produce identical artifacts.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Monomial(Vec<u32>);

impl Monomial {
    pub fn one(nvars: usize) -> Self {
        Monomial(vec![0; nvars])
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        assert!(i < nvars, "variable index {i} out of range for {nvars} variables");
        let mut e = vec![0; nvars];
        e[i] = 1;
        Monomial(e)
    }

    pub fn from_exponents(e: Vec<u32>) -> Self {
        Monomial(e)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn nvars(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_one(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        assert_eq!(self.nvars(), other.nvars(), "monomial variable counts differ");
        Monomial(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// Evaluate the power product at a point.
    pub fn eval<C: Coeff>(&self, x: &[C]) -> C {
        assert_eq!(self.nvars(), x.len(), "evaluation point has wrong arity");
        let mut acc = C::one();
        for (xi, &e) in x.iter().zip(&self.0) {
            for _ in 0..e {
                acc = acc * xi.clone();
            }
        }
        acc
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        assert_eq!(self.nvars(), other.nvars(), "monomial variable counts differ");
        self.degree()
            .cmp(&other.degree())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl std::fmt::Display for Monomial {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_one() {
            return write!(f, "1");
        }
        let mut first = true;
        for (i, &e) in self.0.iter().enumerate() {
            if e == 0 {
                continue;
            }
            if !first {
                write!(f, "*")?;
            }
            first = false;
            if e == 1 {
                write!(f, "X{}", i + 1)?;
            } else {
                write!(f, "X{}^{}", i + 1, e)?;
            }
        }
        Ok(())
    }
}

/// All monomials in `nvars` variables of total degree at most `d`,
/// in increasing graded-lex order.
pub fn monomials_up_to(nvars: usize, d: u32) -> Vec<Monomial> {
    let mut out = Vec::new();
    let mut current = vec![0u32; nvars];
    for deg in 0..=d {
        push_of_degree(nvars, deg, 0, deg, &mut current, &mut out);
    }
    out
}

fn push_of_degree(
    nvars: usize,
    total: u32,
    pos: usize,
    remaining: u32,
    current: &mut Vec<u32>,
    out: &mut Vec<Monomial>,
) {
    if pos == nvars {
        if remaining == 0 {
            out.push(Monomial(current.clone()));
        }
        return;
    }
    if pos + 1 == nvars {
        current[pos] = remaining;
        out.push(Monomial(current.clone()));
        current[pos] = 0;
        return;
    }
    // Lex order within a degree block: larger exponent on earlier variables
    // sorts later, so fill the first position in increasing order.
    for e in 0..=remaining {
        current[pos] = e;
        push_of_degree(nvars, total, pos + 1, remaining - e, current, out);
        current[pos] = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graded_lex_orders_by_degree_first() {
        let n = 2;
        let one = Monomial::one(n);
        let x = Monomial::var(n, 0);
        let y = Monomial::var(n, 1);
        let xy = x.mul(&y);
        let x2 = x.mul(&x);
        assert!(one < x);
        assert!(one < y);
        assert!(y < x2);
        assert!(xy < x2 || x2 < xy); // total order within a degree block
        assert_eq!(x2.degree(), 2);
    }

    #[test]
    fn enumeration_matches_binomial_count() {
        // C(n + d, n) monomials of degree <= d in n variables.
        assert_eq!(monomials_up_to(2, 3).len(), 10);
        assert_eq!(monomials_up_to(3, 2).len(), 10);
        assert_eq!(monomials_up_to(1, 6).len(), 7);
        assert_eq!(monomials_up_to(4, 0).len(), 1);
    }

    #[test]
    fn enumeration_is_sorted_and_unique() {
        let ms = monomials_up_to(3, 4);
        for w in ms.windows(2) {
            assert!(w[0] < w[1]);
        }
    }

    #[test]
    fn evaluation_multiplies_powers() {
        let m = Monomial::from_exponents(vec![2, 1]);
        assert_eq!(m.eval(&[3.0, 5.0]), 45.0);
    }
}
