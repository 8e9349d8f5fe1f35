use std::io::Write;

use crate::geometry::Vec3;

/// Uniformly sampled record of a simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub positions: Vec<Vec<Vec3>>,
    /// Per sample, per node: the ground pushed on the node.
    pub contacts: Vec<Vec<bool>>,
    pub com: Vec<Vec3>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn duration(&self) -> f64 {
        match (self.times.first(), self.times.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }

    pub fn contact_count(&self, sample: usize) -> usize {
        self.contacts[sample].iter().filter(|&&c| c).count()
    }

    /// Horizontal distance between the first and last center of mass.
    pub fn horizontal_displacement(&self) -> f64 {
        match (self.com.first(), self.com.last()) {
            (Some(a), Some(b)) => ((b.x - a.x).powi(2) + (b.y - a.y).powi(2)).sqrt(),
            _ => 0.0,
        }
    }

    /// CSV with header `t,com_x,com_y,com_z,contact_count,n0x,n0y,n0z,...`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let nodes = self.positions.first().map_or(0, Vec::len);
        let mut header = String::from("t,com_x,com_y,com_z,contact_count");
        for n in 0..nodes {
            header.push_str(&format!(",n{n}x,n{n}y,n{n}z"));
        }
        writeln!(out, "{header}")?;
        for i in 0..self.len() {
            let c = &self.com[i];
            write!(out, "{},{},{},{},{}", self.times[i], c.x, c.y, c.z, self.contact_count(i))?;
            for p in &self.positions[i] {
                write!(out, ",{},{},{}", p.x, p.y, p.z)?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}
