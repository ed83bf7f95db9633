//! Trajectory checkpoints.
//!
//! Binary layout (little endian): magic `BLWTRJ01`, `u64` node count, `u64`
//! level count, `f64` p, q, eps, hx, then per level `f64` t followed by the
//! nodal values. The CSV variant carries the same header as `# key=value`
//! comment lines followed by `t,u0,u1,...` rows.

use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use super::{Mesh, SolutionTrajectory};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"BLWTRJ01";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CheckpointFormat {
    #[default]
    Binary,
    Csv,
    None,
}

/// Header plus stored levels, as read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub p: f64,
    pub q: f64,
    pub eps: f64,
    pub hx: f64,
    pub times: Vec<f64>,
    pub u: Vec<Vec<f64>>,
}

pub fn write_checkpoint<W: Write>(traj: &SolutionTrajectory, format: CheckpointFormat, mut out: W) -> Result<()> {
    let nodes = traj.mesh.nodes();
    match format {
        CheckpointFormat::None => {}
        CheckpointFormat::Binary => {
            out.write_all(MAGIC)?;
            out.write_all(&(nodes as u64).to_le_bytes())?;
            out.write_all(&(traj.times.len() as u64).to_le_bytes())?;
            for x in [traj.p, traj.q, traj.eps, traj.mesh.hx] {
                out.write_all(&x.to_le_bytes())?;
            }
            for (t, u) in traj.times.iter().zip(&traj.u) {
                out.write_all(&t.to_le_bytes())?;
                for x in u {
                    out.write_all(&x.to_le_bytes())?;
                }
            }
        }
        CheckpointFormat::Csv => {
            writeln!(out, "# nodes={}", nodes)?;
            writeln!(out, "# levels={}", traj.times.len())?;
            writeln!(out, "# p={}", traj.p)?;
            writeln!(out, "# q={}", traj.q)?;
            writeln!(out, "# eps={}", traj.eps)?;
            writeln!(out, "# hx={}", traj.mesh.hx)?;
            write!(out, "t")?;
            for i in 0..nodes {
                write!(out, ",u{i}")?;
            }
            writeln!(out)?;
            for (t, u) in traj.times.iter().zip(&traj.u) {
                write!(out, "{t}")?;
                for x in u {
                    write!(out, ",{x}")?;
                }
                writeln!(out)?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::Format(format!("not a number: {s:?}")))
}

pub fn read_checkpoint<R: BufRead>(format: CheckpointFormat, mut input: R) -> Result<Checkpoint> {
    match format {
        CheckpointFormat::None => Err(Error::Format("no checkpoint written".into())),
        CheckpointFormat::Binary => {
            let mut magic = [0u8; 8];
            input.read_exact(&mut magic)?;
            if &magic != MAGIC {
                return Err(Error::Format("bad checkpoint magic".into()));
            }
            let nodes = read_u64(&mut input)? as usize;
            let levels = read_u64(&mut input)? as usize;
            let (p, q, eps, hx) =
                (read_f64(&mut input)?, read_f64(&mut input)?, read_f64(&mut input)?, read_f64(&mut input)?);
            let mut times = Vec::with_capacity(levels);
            let mut u = Vec::with_capacity(levels);
            for _ in 0..levels {
                times.push(read_f64(&mut input)?);
                u.push((0..nodes).map(|_| read_f64(&mut input)).collect::<Result<Vec<_>>>()?);
            }
            Ok(Checkpoint { p, q, eps, hx, times, u })
        }
        CheckpointFormat::Csv => {
            let mut header = std::collections::HashMap::new();
            let mut times = Vec::new();
            let mut u = Vec::new();
            for line in input.lines() {
                let line = line?;
                if let Some(kv) = line.strip_prefix("# ") {
                    if let Some((k, v)) = kv.split_once('=') {
                        header.insert(k.to_string(), parse_f64(v)?);
                    }
                    continue;
                }
                if line.starts_with('t') || line.is_empty() {
                    continue;
                }
                let mut fields = line.split(',');
                times.push(parse_f64(fields.next().unwrap_or(""))?);
                u.push(fields.map(parse_f64).collect::<Result<Vec<_>>>()?);
            }
            let get = |k: &str| header.get(k).copied().ok_or_else(|| Error::Format(format!("missing header {k}")));
            Ok(Checkpoint { p: get("p")?, q: get("q")?, eps: get("eps")?, hx: get("hx")?, times, u })
        }
    }
}

impl Checkpoint {
    /// Rebuild a trajectory view (level statistics are not stored).
    pub fn into_trajectory(self) -> Result<SolutionTrajectory> {
        let nodes = self.u.first().map(Vec::len).unwrap_or(0);
        if nodes < 3 {
            return Err(Error::Format("checkpoint has no interior nodes".into()));
        }
        let mesh = Mesh::from_times(nodes - 2, self.times.clone())?;
        Ok(SolutionTrajectory {
            mesh,
            p: self.p,
            q: self.q,
            eps: self.eps,
            level_index: (0..self.times.len()).collect(),
            times: self.times,
            u: self.u,
            stats: Vec::new(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponents::ProblemParams;
    use crate::regime::BoundaryRegime;
    use crate::solver::{solve_regime, MeshSpec, SolveOptions};

    #[test]
    fn both_formats_round_trip() {
        let params = ProblemParams::default();
        let regime = BoundaryRegime::new(0.8, 1.0, 0.1, 1.0).unwrap();
        let spec = MeshSpec { nx: 20, levels: 12, ..Default::default() };
        let opts = SolveOptions { store_stride: 5, ..Default::default() };
        let traj = solve_regime(&params, &regime, &spec, &opts, |_, _, _| {}).unwrap();
        assert_eq!(traj.level_index, vec![0, 5, 10, 12]);
        for format in [CheckpointFormat::Binary, CheckpointFormat::Csv] {
            let mut buf = Vec::new();
            write_checkpoint(&traj, format, &mut buf).unwrap();
            let back = read_checkpoint(format, buf.as_slice()).unwrap();
            assert_eq!(back.times, traj.times);
            assert_eq!(back.u, traj.u);
            assert_eq!((back.p, back.q, back.eps, back.hx), (traj.p, traj.q, traj.eps, traj.mesh.hx));
        }
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_checkpoint(CheckpointFormat::Binary, &b"NOTMAGIC........"[..]).is_err());
    }
}
