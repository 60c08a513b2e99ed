use crate::error::{Error, Result};
use crate::machine::MachineParams;
use crate::network::{EdgeSpec, NetworkTopology};
use crate::state::{Layout, SystemState};

/// Machines plus the network connecting their subtransient buses.
#[derive(Debug, Clone)]
pub struct Plant {
    machines: Vec<MachineParams>,
    topology: NetworkTopology,
}

impl Plant {
    pub fn new(machines: Vec<MachineParams>, edges: Vec<EdgeSpec>) -> Result<Self> {
        for (i, m) in machines.iter().enumerate() {
            m.validate(i + 1)?;
        }
        let xpp: Vec<f64> = machines.iter().map(|m| m.x_d_dprime).collect();
        let topology = NetworkTopology::new(machines.len(), edges, &xpp)?;
        Ok(Self { machines, topology })
    }

    pub fn n(&self) -> usize {
        self.machines.len()
    }

    pub fn m(&self) -> usize {
        self.topology.m()
    }

    pub fn layout(&self) -> Layout {
        Layout::new(self.n(), self.m())
    }

    pub fn machines(&self) -> &[MachineParams] {
        &self.machines
    }

    pub fn topology(&self) -> &NetworkTopology {
        &self.topology
    }

    pub fn inertia(&self) -> Vec<f64> {
        self.machines.iter().map(|m| m.inertia).collect()
    }

    /// Frequency deviation `omega = p / M`.
    pub fn omega(&self, state: &SystemState) -> Vec<f64> {
        state.p().iter().zip(&self.machines).map(|(p, m)| p / m.inertia).collect()
    }

    pub fn check_state(&self, state: &SystemState) -> Result<()> {
        if state.layout() != self.layout() {
            return Err(Error::Dimension {
                what: "state vector",
                expected: self.layout().dim(),
                got: state.as_vector().len(),
            });
        }
        Ok(())
    }

    /// State from rotor angles: `eta = D^T delta`.
    pub fn state_from_angles(
        &self,
        p: &[f64],
        delta: &[f64],
        eq_prime: &[f64],
        ed_prime: &[f64],
        eq_dprime: &[f64],
        ed_dprime: &[f64],
    ) -> Result<SystemState> {
        if delta.len() != self.n() {
            return Err(Error::Dimension { what: "rotor angles", expected: self.n(), got: delta.len() });
        }
        let eta = self.topology.edge_angles(delta);
        let s = SystemState::from_parts(p, eta.as_slice(), eq_prime, ed_prime, eq_dprime, ed_dprime)?;
        self.check_state(&s)?;
        Ok(s)
    }
}
