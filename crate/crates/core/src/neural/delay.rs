use std::collections::VecDeque;

/// Fixed-depth buffer of the most recent values, newest first.
#[derive(Debug, Clone, PartialEq)]
pub struct TappedDelayLine {
    buf: VecDeque<f64>,
}

impl TappedDelayLine {
    /// # Panics
    /// If `depth` is zero.
    pub fn new(depth: usize) -> Self {
        Self::filled(depth, 0.0)
    }

    /// A line pre-loaded with `value` in every tap.
    pub fn filled(depth: usize, value: f64) -> Self {
        assert!(depth >= 1, "delay line depth must be at least 1");
        Self {
            buf: std::iter::repeat_n(value, depth).collect(),
        }
    }

    pub fn depth(&self) -> usize {
        self.buf.len()
    }

    pub fn push(&mut self, v: f64) {
        self.buf.pop_back();
        self.buf.push_front(v);
    }

    /// Tap `i`, where tap 0 is the most recent push.
    pub fn get(&self, i: usize) -> f64 {
        self.buf[i]
    }

    pub fn read(&self) -> Vec<f64> {
        self.buf.iter().copied().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.buf.iter().copied()
    }

    pub fn clear(&mut self) {
        self.buf.iter_mut().for_each(|v| *v = 0.0);
    }
}
