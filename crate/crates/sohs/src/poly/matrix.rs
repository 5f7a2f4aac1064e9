use super::coeff::{Coeff, Rat};
use super::monomial::Monomial;
use super::scalar::ScalarPoly;

/// Square t×t matrix polynomial, stored as t*t scalar polynomials in
/// row-major order. Coefficients are real, so the adjoint is the transpose.
#[derive(Clone, PartialEq, Debug)]
pub struct MatrixPoly<C: Coeff> {
    nvars: usize,
    t: usize,
    entries: Vec<ScalarPoly<C>>,
}

impl<C: Coeff> MatrixPoly<C> {
    pub fn zero(nvars: usize, t: usize) -> Self {
        assert!(t >= 1, "matrix size must be at least 1");
        MatrixPoly {
            nvars,
            t,
            entries: vec![ScalarPoly::zero(nvars); t * t],
        }
    }

    pub fn identity(nvars: usize, t: usize) -> Self {
        let mut m = Self::zero(nvars, t);
        for i in 0..t {
            *m.entry_mut(i, i) = ScalarPoly::one(nvars);
        }
        m
    }

    /// `sigma * I` for a scalar polynomial `sigma`.
    pub fn scalar_identity(sigma: &ScalarPoly<C>, t: usize) -> Self {
        let mut m = Self::zero(sigma.nvars(), t);
        for i in 0..t {
            *m.entry_mut(i, i) = sigma.clone();
        }
        m
    }

    /// Wrap a scalar polynomial as a 1×1 matrix.
    pub fn from_scalar(sigma: ScalarPoly<C>) -> Self {
        let nvars = sigma.nvars();
        MatrixPoly { nvars, t: 1, entries: vec![sigma] }
    }

    pub fn from_rows(rows: Vec<Vec<ScalarPoly<C>>>) -> Self {
        let t = rows.len();
        assert!(t >= 1, "matrix size must be at least 1");
        let nvars = rows[0][0].nvars();
        let mut entries = Vec::with_capacity(t * t);
        for row in rows {
            assert_eq!(row.len(), t, "matrix rows have unequal length");
            for p in row {
                assert_eq!(p.nvars(), nvars, "entries disagree on variable count");
                entries.push(p);
            }
        }
        MatrixPoly { nvars, t, entries }
    }

    /// Constant matrix from row-major scalar values.
    pub fn constant(nvars: usize, t: usize, values: &[C]) -> Self {
        assert_eq!(values.len(), t * t);
        let mut m = Self::zero(nvars, t);
        for (k, v) in values.iter().enumerate() {
            *m.entry_mut(k / t, k % t) = ScalarPoly::constant(nvars, v.clone());
        }
        m
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn size(&self) -> usize {
        self.t
    }

    pub fn entry(&self, i: usize, j: usize) -> &ScalarPoly<C> {
        &self.entries[i * self.t + j]
    }

    pub fn entry_mut(&mut self, i: usize, j: usize) -> &mut ScalarPoly<C> {
        &mut self.entries[i * self.t + j]
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|p| p.is_zero())
    }

    pub fn is_symmetric(&self) -> bool {
        for i in 0..self.t {
            for j in (i + 1)..self.t {
                if self.entry(i, j) != self.entry(j, i) {
                    return false;
                }
            }
        }
        true
    }

    /// Largest total degree over all entries (0 for the zero matrix).
    pub fn degree(&self) -> u32 {
        self.entries.iter().map(|p| p.degree()).max().unwrap_or(0)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.check_shape(other);
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a.add(b))
            .collect();
        MatrixPoly { nvars: self.nvars, t: self.t, entries }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.check_shape(other);
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a.sub(b))
            .collect();
        MatrixPoly { nvars: self.nvars, t: self.t, entries }
    }

    pub fn neg(&self) -> Self {
        let entries = self.entries.iter().map(|p| p.neg()).collect();
        MatrixPoly { nvars: self.nvars, t: self.t, entries }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        self.check_shape(other);
        let t = self.t;
        let mut out = Self::zero(self.nvars, t);
        for i in 0..t {
            for j in 0..t {
                let mut acc = ScalarPoly::zero(self.nvars);
                for k in 0..t {
                    acc = acc.add(&self.entry(i, k).mul(other.entry(k, j)));
                }
                *out.entry_mut(i, j) = acc;
            }
        }
        out
    }

    pub fn scale(&self, c: &C) -> Self {
        let entries = self.entries.iter().map(|p| p.scale(c)).collect();
        MatrixPoly { nvars: self.nvars, t: self.t, entries }
    }

    pub fn scale_poly(&self, sigma: &ScalarPoly<C>) -> Self {
        let entries = self.entries.iter().map(|p| p.mul(sigma)).collect();
        MatrixPoly { nvars: self.nvars, t: self.t, entries }
    }

    /// Adjoint. Coefficients are real, so this is the entrywise transpose.
    pub fn adjoint(&self) -> Self {
        let mut out = Self::zero(self.nvars, self.t);
        for i in 0..self.t {
            for j in 0..self.t {
                *out.entry_mut(j, i) = self.entry(i, j).clone();
            }
        }
        out
    }

    pub fn trace(&self) -> ScalarPoly<C> {
        let mut acc = ScalarPoly::zero(self.nvars);
        for i in 0..self.t {
            acc = acc.add(self.entry(i, i));
        }
        acc
    }

    /// `p* f p` for a transformer `p` of the same size.
    pub fn congruence(&self, p: &Self) -> Self {
        p.adjoint().matmul(self).matmul(p)
    }

    /// Row-major values of `f(x)`.
    pub fn eval(&self, x: &[C]) -> Vec<C> {
        self.entries.iter().map(|p| p.eval(x)).collect()
    }

    /// Coefficient of `m` in entry (i, j).
    pub fn coeff_at(&self, m: &Monomial, i: usize, j: usize) -> C {
        self.entry(i, j).coeff(m)
    }

    /// Scale of the polynomial: largest coefficient magnitude over all
    /// entries, used to make tolerances relative.
    pub fn max_abs_coeff(&self) -> f64 {
        self.entries.iter().map(|p| p.max_abs_coeff()).fold(0.0, f64::max)
    }

    pub fn map_coeff<D: Coeff>(&self, f: impl Fn(&C) -> D + Copy) -> MatrixPoly<D> {
        let entries = self.entries.iter().map(|p| p.map_coeff(f)).collect();
        MatrixPoly { nvars: self.nvars, t: self.t, entries }
    }

    pub fn to_f64_poly(&self) -> MatrixPoly<f64> {
        self.map_coeff(|c| c.to_f64())
    }

    /// If the matrix is `sigma * I`, return `sigma`.
    pub fn as_scalar_identity(&self) -> Option<ScalarPoly<C>> {
        let sigma = self.entry(0, 0);
        for i in 0..self.t {
            for j in 0..self.t {
                if i == j {
                    if self.entry(i, i) != sigma {
                        return None;
                    }
                } else if !self.entry(i, j).is_zero() {
                    return None;
                }
            }
        }
        Some(sigma.clone())
    }

    fn check_shape(&self, other: &Self) {
        assert_eq!(self.nvars, other.nvars, "variable counts differ");
        assert_eq!(self.t, other.t, "matrix sizes differ");
    }
}

impl MatrixPoly<f64> {
    pub fn to_rat_exact(&self) -> MatrixPoly<Rat> {
        self.map_coeff(|c| super::coeff::f64_to_rat_exact(*c))
    }
}

impl<C: Coeff> std::fmt::Display for MatrixPoly<C> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for i in 0..self.t {
            write!(f, "[")?;
            for j in 0..self.t {
                if j > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{}", self.entry(i, j))?;
            }
            writeln!(f, "]")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::super::coeff::{rat_int, Rat};
    use super::*;

    /// g = [[Z, 1], [1, 0]] in one variable.
    fn example_g() -> MatrixPoly<Rat> {
        let z: ScalarPoly<Rat> = ScalarPoly::var(1, 0);
        let one = ScalarPoly::one(1);
        let zero = ScalarPoly::zero(1);
        MatrixPoly::from_rows(vec![vec![z, one.clone()], vec![one, zero]])
    }

    #[test]
    fn identity_is_multiplicative_unit() {
        let f = example_g();
        let id = MatrixPoly::identity(1, 2);
        assert_eq!(id.matmul(&f), f);
        assert_eq!(f.matmul(&id), f);
    }

    #[test]
    fn hermitian_square_of_example() {
        // adjoint(g) * g = [[Z^2 + 1, Z], [Z, 1]] for g = [[Z, 1], [1, 0]].
        let g = example_g();
        let sq = g.adjoint().matmul(&g);
        let z: ScalarPoly<Rat> = ScalarPoly::var(1, 0);
        let expect = MatrixPoly::from_rows(vec![
            vec![z.square().add(&ScalarPoly::one(1)), z.clone()],
            vec![z, ScalarPoly::one(1)],
        ]);
        assert_eq!(sq, expect);
        assert!(sq.is_symmetric());
    }

    #[test]
    fn conjugation_by_matrix_units_extracts_diagonal() {
        // sum_k E_ik* f E_ik = f_ii * I for any symmetric f (here i = 1, t = 2).
        let f = example_g().adjoint().matmul(&example_g());
        let t = 2;
        let i = 0;
        let mut acc = MatrixPoly::zero(1, t);
        for k in 0..t {
            // E_ik has a single 1 at (i, k).
            let mut e = MatrixPoly::zero(1, t);
            *e.entry_mut(i, k) = ScalarPoly::one(1);
            acc = acc.add(&f.congruence(&e));
        }
        let expect = MatrixPoly::scalar_identity(f.entry(i, i), t);
        assert_eq!(acc, expect);
    }

    #[test]
    fn scalar_identity_detection() {
        let sigma: ScalarPoly<Rat> = ScalarPoly::var(2, 0).square();
        let m = MatrixPoly::scalar_identity(&sigma, 3);
        assert_eq!(m.as_scalar_identity(), Some(sigma));
        let g = example_g();
        assert_eq!(g.as_scalar_identity(), None);
    }

    #[test]
    fn trace_of_congruence_matches_expansion() {
        let g = example_g();
        let sq = g.adjoint().matmul(&g);
        let tr = sq.trace();
        // trace = Z^2 + 1 + 1 = Z^2 + 2
        let z: ScalarPoly<Rat> = ScalarPoly::var(1, 0);
        assert_eq!(tr, z.square().add(&ScalarPoly::constant(1, rat_int(2))));
    }
}
