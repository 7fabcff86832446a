use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use super::{QuboError, QuboModel, VariableRegistry};

/// Spin model `E(s) = -sum_{i<j} J_ij s_i s_j - sum_i h_i s_i + offset`,
/// `s_i in {-1, +1}`, couplings stored once per unordered pair.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IsingModel {
    pub h: Vec<f64>,
    pub couplings: BTreeMap<(usize, usize), f64>,
    pub offset: f64,
    pub registry: VariableRegistry,
}

impl IsingModel {
    pub fn n(&self) -> usize {
        self.h.len()
    }

    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        let key = if i < j { (i, j) } else { (j, i) };
        self.couplings.get(&key).copied().unwrap_or(0.0)
    }

    pub fn energy(&self, spins: &[i8]) -> Result<f64, QuboError> {
        if spins.len() != self.n() {
            return Err(QuboError::Arity {
                expected: self.n(),
                got: spins.len(),
            });
        }
        if let Some(index) = spins.iter().position(|&s| s != 1 && s != -1) {
            return Err(QuboError::Alphabet {
                index,
                value: i64::from(spins[index]),
            });
        }
        let mut e = self.offset;
        for (h, &s) in self.h.iter().zip(spins) {
            e -= h * f64::from(s);
        }
        for (&(i, j), &jij) in &self.couplings {
            e -= jij * f64::from(spins[i]) * f64::from(spins[j]);
        }
        Ok(e)
    }
}

impl QuboModel {
    /// Change of variables `x_i = (s_i + 1) / 2`.
    ///
    /// With the stored pair coefficient `q_ij` (twice the symmetric matrix
    /// entry of the ordered double sum), `J_ij = -q_ij / 4` and
    /// `h_i = -(c_i + sum_j q_ij / 2) / 2`. The constant shift is kept so both
    /// forms give the same energy on corresponding assignments.
    pub fn to_ising(&self) -> IsingModel {
        let n = self.n();
        let mut h: Vec<f64> = self.linear.iter().map(|c| -0.5 * c).collect();
        let mut offset = self.offset + 0.5 * self.linear.iter().sum::<f64>();
        let mut couplings = BTreeMap::new();
        let mut row_sums = vec![0.0; n];
        for (&(i, j), &q) in &self.quadratic {
            couplings.insert((i, j), -0.25 * q);
            row_sums[i] += q;
            row_sums[j] += q;
            offset += 0.25 * q;
        }
        for (hi, sum) in h.iter_mut().zip(row_sums) {
            *hi -= 0.25 * sum;
        }
        IsingModel {
            h,
            couplings,
            offset,
            registry: self.registry.clone(),
        }
    }
}

/// Spin image of a binary assignment.
pub fn spins_of(x: &[u8]) -> Vec<i8> {
    x.iter().map(|&b| if b == 0 { -1 } else { 1 }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_linear() {
        let mut m = QuboModel::with_nodes(["a"]).unwrap();
        m.add_linear(0, 2.0);
        let ising = m.to_ising();
        assert_eq!(ising.h, vec![-1.0]);
        assert_eq!(ising.offset, 1.0);
        assert_eq!(ising.energy(&[1]).unwrap(), 2.0);
        assert_eq!(m.energy(&[1]).unwrap(), 2.0);
    }

    #[test]
    fn single_pair() {
        let mut m = QuboModel::with_nodes(["a", "b"]).unwrap();
        m.add_quadratic(0, 1, 4.0);
        let ising = m.to_ising();
        assert_eq!(ising.coupling(0, 1), -1.0);
        assert_eq!(ising.h, vec![-1.0, -1.0]);
        assert_eq!(ising.offset, 1.0);
        for x in [[0u8, 0], [1, 0], [0, 1], [1, 1]] {
            assert_eq!(ising.energy(&spins_of(&x)).unwrap(), m.energy(&x).unwrap());
        }
    }

    #[test]
    fn empty_model() {
        let ising = QuboModel::new().to_ising();
        assert_eq!(ising.n(), 0);
        assert_eq!(ising.offset, 0.0);
        assert_eq!(ising.energy(&[]).unwrap(), 0.0);
    }

    #[test]
    fn all_up_coupling() {
        let mut ising = IsingModel {
            h: vec![0.0, 0.0],
            offset: 0.5,
            ..Default::default()
        };
        ising.couplings.insert((0, 1), 1.0);
        assert_eq!(ising.energy(&[1, 1]).unwrap(), -1.0 + 0.5);
        assert!(matches!(
            ising.energy(&[1, 0]),
            Err(QuboError::Alphabet { index: 1, value: 0 })
        ));
    }
}
