use crate::error::ModelError;

/// Ordered finite set of scalar values a discrete variable can take.
///
/// The order is fixed at construction and defines the index `0..d-1` used by
/// inputs, beliefs and factor tables.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDomain {
    values: Vec<f64>,
}

impl DiscreteDomain {
    pub fn new(values: Vec<f64>) -> Result<Self, ModelError> {
        if values.is_empty() {
            return Err(ModelError::EmptyDomain);
        }
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(ModelError::NonFiniteDomainValue(v));
            }
            if values[..i].contains(&v) {
                return Err(ModelError::DuplicateDomainValue(v));
            }
        }
        Ok(Self { values })
    }

    /// Integers `lo..=hi`.
    pub fn range(lo: i64, hi: i64) -> Result<Self, ModelError> {
        Self::new((lo..=hi).map(|v| v as f64).collect())
    }

    /// The `{0, 1}` domain.
    pub fn bit() -> Self {
        Self {
            values: vec![0.0, 1.0],
        }
    }

    pub fn size(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, index: usize) -> f64 {
        self.values[index]
    }

    pub fn index_of(&self, value: f64) -> Option<usize> {
        self.values.iter().position(|&v| v == value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_is_inclusive() {
        let d = DiscreteDomain::range(1, 10).unwrap();
        assert_eq!(d.size(), 10);
        assert_eq!(d.value(0), 1.0);
        assert_eq!(d.index_of(10.0), Some(9));
    }

    #[test]
    fn rejects_empty_and_duplicates() {
        assert_eq!(DiscreteDomain::new(vec![]), Err(ModelError::EmptyDomain));
        assert_eq!(
            DiscreteDomain::new(vec![0.0, 1.0, 0.0]),
            Err(ModelError::DuplicateDomainValue(0.0))
        );
        assert!(DiscreteDomain::new(vec![f64::NAN]).is_err());
    }
}
