use super::{NnError, Real};

/// Dense `[batch, channels, height, width]` tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4<T> {
    pub shape: [usize; 4],
    pub data: Vec<T>,
}

impl<T: Real> Tensor4<T> {
    pub fn new(shape: [usize; 4], data: Vec<T>) -> Result<Self, NnError> {
        let len: usize = shape.iter().product();
        if data.len() != len {
            return Err(NnError::ShapeMismatch(format!("{} values for shape {shape:?}", data.len())));
        }
        Ok(Tensor4 { shape, data })
    }

    pub fn zeros(shape: [usize; 4]) -> Self {
        Tensor4 { shape, data: vec![T::zero(); shape.iter().product()] }
    }

    pub fn batch(&self) -> usize {
        self.shape[0]
    }

    pub fn sample_len(&self) -> usize {
        self.shape[1] * self.shape[2] * self.shape[3]
    }

    pub fn sample(&self, i: usize) -> &[T] {
        let len = self.sample_len();
        &self.data[i * len..(i + 1) * len]
    }

    /// Stacks equally shaped samples.
    pub fn stack(sample_shape: [usize; 3], samples: &[&[T]]) -> Result<Self, NnError> {
        let len: usize = sample_shape.iter().product();
        let mut data = Vec::with_capacity(len * samples.len());
        for s in samples {
            if s.len() != len {
                return Err(NnError::ShapeMismatch(format!("sample of {} values, expected {len}", s.len())));
            }
            data.extend_from_slice(s);
        }
        let [c, h, w] = sample_shape;
        Ok(Tensor4 { shape: [samples.len(), c, h, w], data })
    }
}

/// Row-major `rows x cols` score matrix (one row of logits per sample).
#[derive(Debug, Clone, PartialEq)]
pub struct Scores<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Copy> Scores<T> {
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}
