use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `n` observations of (continuous covariates, categorical covariates,
/// angular response).
///
/// Covariates are stored row-major. Categorical values are level indices in
/// `0..level_counts[l]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedSample {
    n: usize,
    k: usize,
    p: usize,
    x: Vec<f64>,
    z: Vec<u32>,
    level_counts: Vec<usize>,
    theta: Vec<f64>,
    level_names: Vec<Vec<String>>,
}

impl MixedSample {
    pub fn new(
        x: Vec<Vec<f64>>,
        z: Vec<Vec<u32>>,
        level_counts: Vec<usize>,
        theta: Vec<f64>,
    ) -> Result<Self> {
        let n = theta.len();
        if n == 0 {
            return Err(Error::invalid("sample must contain at least one observation"));
        }
        if x.len() != n || z.len() != n {
            return Err(Error::invalid(format!(
                "row count mismatch: {} responses, {} continuous rows, {} categorical rows",
                n,
                x.len(),
                z.len()
            )));
        }
        let k = x[0].len();
        let p = level_counts.len();
        let mut flat_x = Vec::with_capacity(n * k);
        let mut flat_z = Vec::with_capacity(n * p);
        for (i, (xr, zr)) in x.iter().zip(&z).enumerate() {
            if xr.len() != k {
                return Err(Error::invalid(format!(
                    "row {i}: expected {k} continuous covariates"
                )));
            }
            if zr.len() != p {
                return Err(Error::invalid(format!(
                    "row {i}: expected {p} categorical covariates"
                )));
            }
            if let Some(v) = xr.iter().find(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("row {i}: non-finite covariate {v}")));
            }
            for (l, (&lv, &c)) in zr.iter().zip(&level_counts).enumerate() {
                if lv as usize >= c {
                    return Err(Error::invalid(format!(
                        "row {i}: level {lv} out of range for factor {l} with {c} levels"
                    )));
                }
            }
            flat_x.extend_from_slice(xr);
            flat_z.extend_from_slice(zr);
        }
        if let Some((i, t)) = theta.iter().enumerate().find(|(_, t)| !t.is_finite()) {
            return Err(Error::invalid(format!("row {i}: non-finite response {t}")));
        }
        Ok(Self {
            n,
            k,
            p,
            x: flat_x,
            z: flat_z,
            level_counts,
            theta,
            level_names: Vec::new(),
        })
    }

    /// Convenience constructor for one continuous covariate and one factor.
    pub fn univariate(x: &[f64], z: &[u32], levels: usize, theta: &[f64]) -> Result<Self> {
        Self::new(
            x.iter().map(|&v| vec![v]).collect(),
            z.iter().map(|&v| vec![v]).collect(),
            vec![levels],
            theta.to_vec(),
        )
    }

    pub fn with_level_names(mut self, names: Vec<Vec<String>>) -> Result<Self> {
        if names.len() != self.p || names.iter().zip(&self.level_counts).any(|(v, &c)| v.len() != c) {
            return Err(Error::invalid("level names do not match level counts"));
        }
        self.level_names = names;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn x_row(&self, i: usize) -> &[f64] {
        &self.x[i * self.k..(i + 1) * self.k]
    }

    pub fn z_row(&self, i: usize) -> &[u32] {
        &self.z[i * self.p..(i + 1) * self.p]
    }

    pub fn x_column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.x[i * self.k + j]).collect()
    }

    pub fn z_column(&self, l: usize) -> Vec<u32> {
        (0..self.n).map(|i| self.z[i * self.p + l]).collect()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn level_counts(&self) -> &[usize] {
        &self.level_counts
    }

    /// Label of level `v` of factor `l`; falls back to the index.
    pub fn level_name(&self, l: usize, v: u32) -> String {
        self.level_names
            .get(l)
            .and_then(|names| names.get(v as usize))
            .cloned()
            .unwrap_or_else(|| v.to_string())
    }

    pub fn level_names(&self) -> &[Vec<String>] {
        &self.level_names
    }

    /// Same design with a new response vector.
    pub fn with_theta(&self, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != self.n {
            return Err(Error::invalid("replacement response has the wrong length"));
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("replacement response contains non-finite values"));
        }
        Ok(Self {
            theta,
            ..self.clone()
        })
    }

    /// Rows at `indices`, in that order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::invalid("row selection is empty"));
        }
        let mut out = Self {
            n: indices.len(),
            x: Vec::with_capacity(indices.len() * self.k),
            z: Vec::with_capacity(indices.len() * self.p),
            theta: Vec::with_capacity(indices.len()),
            ..self.clone()
        };
        for &i in indices {
            if i >= self.n {
                return Err(Error::invalid(format!("row index {i} out of range")));
            }
            out.x.extend_from_slice(self.x_row(i));
            out.z.extend_from_slice(self.z_row(i));
            out.theta.push(self.theta[i]);
        }
        Ok(out)
    }

    pub fn without_row(&self, i: usize) -> Result<Self> {
        let keep: Vec<usize> = (0..self.n).filter(|&r| r != i).collect();
        self.select_rows(&keep)
    }

    /// Keeps only the listed continuous columns and factors.
    pub fn project(&self, continuous: &[usize], categorical: &[usize]) -> Result<Self> {
        if continuous.iter().any(|&j| j >= self.k) || categorical.iter().any(|&l| l >= self.p) {
            return Err(Error::invalid("projection column out of range"));
        }
        let x = (0..self.n)
            .map(|i| continuous.iter().map(|&j| self.x[i * self.k + j]).collect())
            .collect();
        let z = (0..self.n)
            .map(|i| categorical.iter().map(|&l| self.z[i * self.p + l]).collect())
            .collect();
        let counts = categorical.iter().map(|&l| self.level_counts[l]).collect();
        let mut out = Self::new(x, z, counts, self.theta.clone())?;
        if !self.level_names.is_empty() {
            out.level_names = categorical.iter().map(|&l| self.level_names[l].clone()).collect();
        }
        Ok(out)
    }

    /// Indices of rows whose factor `l` equals `level`.
    pub fn rows_at_level(&self, l: usize, level: u32) -> Vec<usize> {
        (0..self.n).filter(|&i| self.z[i * self.p + l] == level).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> MixedSample {
        MixedSample::univariate(&[0.1, 0.2, 0.3], &[0, 1, 0], 2, &[0.5, 1.0, 1.5]).unwrap()
    }

    #[test]
    fn accessors() {
        let s = toy();
        assert_eq!((s.n(), s.k(), s.p()), (3, 1, 1));
        assert_eq!(s.x_row(1), &[0.2]);
        assert_eq!(s.z_row(2), &[0]);
        assert_eq!(s.rows_at_level(0, 0), vec![0, 2]);
        let d = s.without_row(1).unwrap();
        assert_eq!(d.theta(), &[0.5, 1.5]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(MixedSample::univariate(&[0.1], &[2], 2, &[0.0]).is_err());
        assert!(MixedSample::univariate(&[f64::NAN], &[0], 2, &[0.0]).is_err());
        assert!(MixedSample::univariate(&[0.1], &[0], 2, &[f64::INFINITY]).is_err());
        assert!(MixedSample::univariate(&[], &[], 2, &[]).is_err());
    }

    #[test]
    fn level_names_fall_back_to_index() {
        let s = toy();
        assert_eq!(s.level_name(0, 1), "1");
        let s = s.with_level_names(vec![vec!["a".into(), "b".into()]]).unwrap();
        assert_eq!(s.level_name(0, 1), "b");
    }
}
