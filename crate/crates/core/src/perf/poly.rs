use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_DEGREE: usize = 7;

/// Number of monomials of total degree `<= degree` in `arity` variables.
pub fn monomial_count(arity: usize, degree: usize) -> usize {
    match arity {
        1 => degree + 1,
        _ => (degree + 1) * (degree + 2) / 2,
    }
}

/// Exponents in coefficient order: first exponent outer, second inner.
pub fn monomials(arity: usize, degree: usize) -> Vec<(usize, usize)> {
    match arity {
        1 => (0..=degree).map(|i| (i, 0)).collect(),
        _ => (0..=degree).flat_map(|i| (0..=degree - i).map(move |j| (i, j))).collect(),
    }
}

/// Polynomial in one or two inputs, stored over affinely normalized inputs
/// `u = (x - offset) / scale`. Coefficients follow [`monomials`], which is
/// also the nesting order used by [`PolyModel::eval`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyModel {
    pub arity: usize,
    pub degree: usize,
    pub coefficients: Vec<f64>,
    #[serde(default)]
    pub offset: Vec<f64>,
    #[serde(default)]
    pub scale: Vec<f64>,
}

impl PolyModel {
    /// Model over raw inputs (offset 0, scale 1).
    pub fn new(arity: usize, degree: usize, coefficients: Vec<f64>) -> Result<Self> {
        Self::with_normalization(arity, degree, coefficients, vec![0.0; arity], vec![1.0; arity])
    }

    pub fn with_normalization(
        arity: usize,
        degree: usize,
        coefficients: Vec<f64>,
        offset: Vec<f64>,
        scale: Vec<f64>,
    ) -> Result<Self> {
        let m = PolyModel { arity, degree, coefficients, offset, scale };
        m.validate()?;
        Ok(m)
    }

    pub fn constant(arity: usize, value: f64) -> Self {
        PolyModel { arity, degree: 0, coefficients: vec![value], offset: vec![0.0; arity], scale: vec![1.0; arity] }
    }

    /// Checks shape invariants. Deserialized models with no normalization
    /// fields get the identity normalization.
    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.arity) {
            return Err(Error::Profile(format!("arity {} not supported", self.arity)));
        }
        if self.degree > MAX_DEGREE {
            return Err(Error::Profile(format!("degree {} exceeds {MAX_DEGREE}", self.degree)));
        }
        let want = monomial_count(self.arity, self.degree);
        if self.coefficients.len() != want {
            return Err(Error::Profile(format!(
                "degree {} arity {} needs {want} coefficients, got {}",
                self.degree,
                self.arity,
                self.coefficients.len()
            )));
        }
        if self.offset.len() != self.arity || self.scale.len() != self.arity {
            return Err(Error::Profile("normalization length does not match arity".into()));
        }
        if self.scale.iter().any(|&s| s == 0.0 || !s.is_finite()) {
            return Err(Error::Profile("normalization scale must be finite and nonzero".into()));
        }
        Ok(())
    }

    pub(crate) fn normalized(&self, x: &[f64]) -> (f64, f64) {
        let u = (x[0] - self.offset[0]) / self.scale[0];
        let v = if self.arity == 2 { (x[1] - self.offset[1]) / self.scale[1] } else { 0.0 };
        (u, v)
    }

    /// Nested (Horner) evaluation.
    pub fn eval(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.arity, "input arity mismatch");
        let (u, v) = self.normalized(x);
        let c = &self.coefficients;
        if self.arity == 1 {
            return c.iter().rev().fold(0.0, |acc, &k| acc * u + k);
        }
        let mut end = c.len();
        let mut acc = 0.0;
        for i in (0..=self.degree).rev() {
            let n = self.degree - i + 1;
            let inner = c[end - n..end].iter().rev().fold(0.0, |a, &k| a * v + k);
            acc = acc * u + inner;
            end -= n;
        }
        acc
    }

    /// Evaluation clamped at zero, for use as a duration.
    pub fn eval_clamped(&self, x: &[f64]) -> f64 {
        self.eval(x).max(0.0)
    }

    /// Term-by-term evaluation with explicit powers.
    pub fn eval_naive(&self, x: &[f64]) -> f64 {
        let (u, v) = self.normalized(x);
        monomials(self.arity, self.degree)
            .iter()
            .zip(&self.coefficients)
            .map(|(&(i, j), &k)| k * u.powi(i as i32) * v.powi(j as i32))
            .sum()
    }

    /// Multiplications done by [`PolyModel::eval`], excluding normalization.
    pub fn horner_multiplications(&self) -> usize {
        match self.arity {
            1 => self.degree,
            _ => (0..=self.degree).map(|i| self.degree - i).sum::<usize>() + self.degree,
        }
    }

    /// Multiplications of term-by-term evaluation with repeated-product
    /// powers: `i + j` per monomial (coefficient times each factor).
    pub fn naive_multiplications(&self) -> usize {
        monomials(self.arity, self.degree).iter().map(|&(i, j)| i + j).sum()
    }

    /// Partial derivative with respect to input `var`, in raw input units.
    pub fn derivative(&self, var: usize) -> PolyModel {
        assert!(var < self.arity);
        if self.degree == 0 {
            return PolyModel { coefficients: vec![0.0], ..self.clone() };
        }
        let d = self.degree - 1;
        let src = monomials(self.arity, self.degree);
        let idx = |i: usize, j: usize| src.iter().position(|&m| m == (i, j)).unwrap();
        let coefficients = monomials(self.arity, d)
            .iter()
            .map(|&(i, j)| {
                if var == 0 {
                    (i + 1) as f64 * self.coefficients[idx(i + 1, j)]
                } else {
                    (j + 1) as f64 * self.coefficients[idx(i, j + 1)]
                }
            })
            .map(|k| k / self.scale[var])
            .collect();
        PolyModel { degree: d, coefficients, ..self.clone() }
    }

    /// Coefficients of the same polynomial over raw inputs, in the same
    /// monomial order.
    pub fn raw_coefficients(&self) -> Vec<f64> {
        let terms = monomials(self.arity, self.degree);
        let mut out = vec![0.0; terms.len()];
        let pos = |p: usize, q: usize| terms.iter().position(|&m| m == (p, q)).unwrap();
        // ((x - o) / s)^n = sum_p C(n,p) x^p (-o)^(n-p) / s^n
        let expand = |n: usize, o: f64, s: f64| -> Vec<f64> {
            (0..=n).map(|p| binomial(n, p) * (-o).powi((n - p) as i32) / s.powi(n as i32)).collect()
        };
        for (&(i, j), &k) in terms.iter().zip(&self.coefficients) {
            let a = expand(i, self.offset[0], self.scale[0]);
            let b = if self.arity == 2 { expand(j, self.offset[1], self.scale[1]) } else { vec![1.0] };
            for (p, &ap) in a.iter().enumerate() {
                for (q, &bq) in b.iter().enumerate() {
                    out[pos(p, q)] += k * ap * bq;
                }
            }
        }
        out
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}
