//! Dense frames × bins storage shared by spectrograms, gain maps and telemetry.

use std::ops::{Index, IndexMut};

/// Row-major time-frequency matrix, one row per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TfGrid<T> {
    frames: usize,
    bins: usize,
    data: Vec<T>,
}

impl<T: Clone> TfGrid<T> {
    pub fn filled(frames: usize, bins: usize, value: T) -> Self {
        Self {
            frames,
            bins,
            data: vec![value; frames * bins],
        }
    }
}

impl<T> TfGrid<T> {
    pub fn from_vec(frames: usize, bins: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), frames * bins, "grid data length mismatch");
        Self { frames, bins, data }
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn frame(&self, l: usize) -> &[T] {
        &self.data[l * self.bins..(l + 1) * self.bins]
    }

    pub fn frame_mut(&mut self, l: usize) -> &mut [T] {
        &mut self.data[l * self.bins..(l + 1) * self.bins]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks_exact(self.bins.max(1))
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> TfGrid<U> {
        TfGrid {
            frames: self.frames,
            bins: self.bins,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn same_shape<U>(&self, other: &TfGrid<U>) -> bool {
        self.frames == other.frames && self.bins == other.bins
    }
}

impl<T> Index<(usize, usize)> for TfGrid<T> {
    type Output = T;

    fn index(&self, (l, k): (usize, usize)) -> &T {
        &self.data[l * self.bins + k]
    }
}

impl<T> IndexMut<(usize, usize)> for TfGrid<T> {
    fn index_mut(&mut self, (l, k): (usize, usize)) -> &mut T {
        &mut self.data[l * self.bins + k]
    }
}
