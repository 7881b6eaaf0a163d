//! Structured text output: CSV tables and JSON reports.
//!
//! All floats are written with the shortest round-trip representation, so
//! identical inputs produce byte-identical files.

use crate::decay::{DecaySeries, RateFit};
use crate::dynamics::{FieldState, Scheme, Trajectory};
use crate::params::RollParams;
use crate::semigroup::KernelTable;
use crate::symbol::SpectralData;
use serde::Serialize;
use std::io::{self, Write};

/// Eigenvalue curves: `k,re_lc_p,im_lc_p,re_lc_m,im_lc_m,re_ls,im_ls`.
pub fn write_curves_csv<W: Write>(w: &mut W, sd: &SpectralData) -> io::Result<()> {
    writeln!(w, "k,re_lc_p,im_lc_p,re_lc_m,im_lc_m,re_ls,im_ls")?;
    for (i, &k) in sd.k_grid.iter().enumerate() {
        writeln!(
            w,
            "{:?},{:?},{:?},{:?},{:?},{:?},{:?}",
            k,
            sd.lc_plus[i].re,
            sd.lc_plus[i].im,
            sd.lc_minus[i].re,
            sd.lc_minus[i].im,
            sd.ls[i].re,
            sd.ls[i].im
        )?;
    }
    Ok(())
}

/// Kernel samples: `z,t,component,i,j,value` with component `c` or `e`.
pub fn write_kernel_csv<W: Write>(w: &mut W, table: &KernelTable) -> io::Result<()> {
    writeln!(w, "z,t,component,i,j,value")?;
    for (ti, &t) in table.times.iter().enumerate() {
        for (comp, kernels) in [("c", &table.gc[ti]), ("e", &table.ge[ti])] {
            for (zi, &z) in table.z.iter().enumerate() {
                let m = &kernels[zi];
                for i in 0..3 {
                    for j in 0..3 {
                        writeln!(w, "{:?},{:?},{},{},{},{:?}", z, t, comp, i, j, m.e[i][j].re)?;
                    }
                }
            }
        }
    }
    Ok(())
}

/// Single series: `t,value`.
pub fn write_series_csv<W: Write>(w: &mut W, s: &DecaySeries) -> io::Result<()> {
    writeln!(w, "t,value")?;
    for (t, v) in s.times.iter().zip(s.values.iter()) {
        writeln!(w, "{t:?},{v:?}")?;
    }
    Ok(())
}

/// Trajectory norm log: `t,norm_id,value` over all tracked ids.
pub fn write_norm_log_csv<W: Write>(w: &mut W, traj: &Trajectory) -> io::Result<()> {
    writeln!(w, "t,norm_id,value")?;
    for series in crate::decay::track_norms(traj) {
        for (t, v) in series.times.iter().zip(series.values.iter()) {
            writeln!(w, "{t:?},{},{v:?}", series.norm_id)?;
        }
    }
    Ok(())
}

/// One snapshot field as `x,value` rows.
pub fn write_field_csv<W: Write>(w: &mut W, x: &[f64], field: &[f64]) -> io::Result<()> {
    writeln!(w, "x,value")?;
    for (xv, fv) in x.iter().zip(field.iter()) {
        writeln!(w, "{xv:?},{fv:?}")?;
    }
    Ok(())
}

/// Metadata accompanying persisted snapshots.
#[derive(Clone, Debug, Serialize)]
pub struct SnapshotManifest {
    pub l: f64,
    pub n: usize,
    pub params: RollParams,
    pub seed: Option<u64>,
    pub scheme: Scheme,
    pub dt: f64,
    pub times: Vec<f64>,
    pub files: Vec<String>,
}

impl SnapshotManifest {
    pub fn from_trajectory(traj: &Trajectory, seed: Option<u64>, files: Vec<String>) -> Self {
        SnapshotManifest {
            l: traj.l,
            n: traj.n,
            params: traj.params,
            seed,
            scheme: traj.scheme,
            dt: traj.dt,
            times: traj.snapshots.iter().map(|s: &FieldState| s.t).collect(),
            files,
        }
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable report");
    s.push('\n');
    s
}

/// Rate-fit table emitted by the simulation commands.
#[derive(Clone, Debug, Serialize)]
pub struct FitReport {
    pub norm_id: String,
    pub fit: RateFit,
    pub target: Option<f64>,
    pub tolerance: Option<f64>,
    pub pass: Option<bool>,
}
