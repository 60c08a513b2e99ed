//! Stacked plant state `x = (p, eta, E'_q, E'_d, E''_q, E''_d)`.
//!
//! The same layout is used for gradients and time derivatives, so a
//! [`Layout`] is kept separate from the state itself.

use std::ops::Range;

use nalgebra::DVector;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub n: usize,
    pub m: usize,
}

impl Layout {
    pub fn new(n: usize, m: usize) -> Self {
        Self { n, m }
    }

    pub fn dim(&self) -> usize {
        5 * self.n + self.m
    }

    pub fn p(&self) -> Range<usize> {
        0..self.n
    }

    pub fn eta(&self) -> Range<usize> {
        self.n..self.n + self.m
    }

    pub fn eq_prime(&self) -> Range<usize> {
        let s = self.n + self.m;
        s..s + self.n
    }

    pub fn ed_prime(&self) -> Range<usize> {
        let s = 2 * self.n + self.m;
        s..s + self.n
    }

    pub fn eq_dprime(&self) -> Range<usize> {
        let s = 3 * self.n + self.m;
        s..s + self.n
    }

    pub fn ed_dprime(&self) -> Range<usize> {
        let s = 4 * self.n + self.m;
        s..s + self.n
    }

    /// All internal voltage components.
    pub fn voltages(&self) -> Range<usize> {
        self.n + self.m..self.dim()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    layout: Layout,
    data: DVector<f64>,
}

impl SystemState {
    pub fn zeros(n: usize, m: usize) -> Self {
        let layout = Layout::new(n, m);
        Self { layout, data: DVector::zeros(layout.dim()) }
    }

    pub fn from_vector(layout: Layout, data: DVector<f64>) -> Result<Self> {
        if data.len() != layout.dim() {
            return Err(Error::Dimension { what: "state vector", expected: layout.dim(), got: data.len() });
        }
        Ok(Self { layout, data })
    }

    /// Build from per-quantity vectors. `eta` must already be `D^T delta`.
    pub fn from_parts(
        p: &[f64],
        eta: &[f64],
        eq_prime: &[f64],
        ed_prime: &[f64],
        eq_dprime: &[f64],
        ed_dprime: &[f64],
    ) -> Result<Self> {
        let n = p.len();
        for (what, v) in [
            ("E'_q", eq_prime),
            ("E'_d", ed_prime),
            ("E''_q", eq_dprime),
            ("E''_d", ed_dprime),
        ] {
            if v.len() != n {
                return Err(Error::Dimension { what, expected: n, got: v.len() });
            }
        }
        let data: Vec<f64> = [p, eta, eq_prime, ed_prime, eq_dprime, ed_dprime].concat();
        Ok(Self { layout: Layout::new(n, eta.len()), data: DVector::from_vec(data) })
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn n(&self) -> usize {
        self.layout.n
    }

    pub fn m(&self) -> usize {
        self.layout.m
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.data
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.data
    }

    fn part(&self, r: Range<usize>) -> &[f64] {
        &self.data.as_slice()[r]
    }

    fn part_mut(&mut self, r: Range<usize>) -> &mut [f64] {
        &mut self.data.as_mut_slice()[r]
    }

    pub fn p(&self) -> &[f64] {
        self.part(self.layout.p())
    }

    pub fn eta(&self) -> &[f64] {
        self.part(self.layout.eta())
    }

    pub fn eq_prime(&self) -> &[f64] {
        self.part(self.layout.eq_prime())
    }

    pub fn ed_prime(&self) -> &[f64] {
        self.part(self.layout.ed_prime())
    }

    pub fn eq_dprime(&self) -> &[f64] {
        self.part(self.layout.eq_dprime())
    }

    pub fn ed_dprime(&self) -> &[f64] {
        self.part(self.layout.ed_dprime())
    }

    pub fn p_mut(&mut self) -> &mut [f64] {
        let r = self.layout.p();
        self.part_mut(r)
    }

    pub fn eta_mut(&mut self) -> &mut [f64] {
        let r = self.layout.eta();
        self.part_mut(r)
    }

    pub fn eq_prime_mut(&mut self) -> &mut [f64] {
        let r = self.layout.eq_prime();
        self.part_mut(r)
    }

    pub fn ed_prime_mut(&mut self) -> &mut [f64] {
        let r = self.layout.ed_prime();
        self.part_mut(r)
    }

    pub fn eq_dprime_mut(&mut self) -> &mut [f64] {
        let r = self.layout.eq_dprime();
        self.part_mut(r)
    }

    pub fn ed_dprime_mut(&mut self) -> &mut [f64] {
        let r = self.layout.ed_dprime();
        self.part_mut(r)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
