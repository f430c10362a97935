//! `generate`: writes snapshot datasets to disk. Everything is a pure
//! function of (config, seed): re-running overwrites byte-identical files.

use std::path::PathBuf;

use snapset_core::data::format::write_snapshots;
use snapset_core::data::snapshot::Snapshot;
use snapset_core::data::{parity, rqc, toric};
use snapset_core::seeds::{child_seed, stream};
use snapset_core::{Error, Result};

use crate::config::{GenerateConfig, Resolved};

pub fn run(config: &GenerateConfig, resolved: &Resolved) -> Result<Vec<PathBuf>> {
    let written = match config {
        GenerateConfig::Toric { torus_rows, torus_cols, p_flips, samples, window } => {
            toric_files(*torus_rows, *torus_cols, p_flips, *samples, *window, resolved)
        }
        GenerateConfig::Rqc { rows, cols, depths, instances, shots, theta_pi, phi_pi } => {
            rqc_files(*rows, *cols, depths, *instances, *shots, *theta_pi, *phi_pi, resolved)
        }
        GenerateConfig::Parity { rows, cols, k, count } => {
            parity_files(*rows, *cols, *k, *count, resolved)
        }
    }?;
    println!("generate: {} file(s) written to {}", written.len(), resolved.out.display());
    Ok(written)
}

fn toric_files(
    torus_rows: usize,
    torus_cols: usize,
    p_flips: &[f64],
    samples: usize,
    window: Option<[usize; 2]>,
    resolved: &Resolved,
) -> Result<Vec<PathBuf>> {
    if p_flips.is_empty() {
        return Err(Error::Config("p_flips must name at least one flip probability".into()));
    }
    if samples == 0 {
        return Err(Error::Config("samples must be positive".into()));
    }
    let torus = toric::Torus::new(torus_rows, torus_cols)?;
    let mut written = Vec::new();
    for &p in p_flips {
        let label = format!("toric-p{p:.6}");
        let mut rng = stream(resolved.seed, &label);
        let ground = toric::sample_ground_states(torus, samples, &mut rng);
        let noisy = toric::apply_bitflip_channel(&ground, p, &mut rng)?;
        let mut grids = Vec::with_capacity(noisy.len());
        for edges in &noisy {
            grids.push(toric::plaquette_transform(edges)?);
        }
        let snapshots: Vec<Snapshot> = match window {
            Some([wr, wc]) => {
                let mut out = Vec::new();
                for grid in &grids {
                    out.extend(toric::window_slices(grid, wr, wc)?);
                }
                out
            }
            None => grids,
        };
        let meta = serde_json::json!({
            "generator": "toric",
            "torus_rows": torus_rows,
            "torus_cols": torus_cols,
            "p_flip": p,
            "samples": samples,
            "window": window,
            "seed": resolved.seed,
        });
        let path = resolved.out.join(format!("toric_p{p:.4}.qsnp"));
        write_snapshots(&path, &snapshots, &meta)?;
        written.push(path);
    }
    Ok(written)
}

#[allow(clippy::too_many_arguments)]
fn rqc_files(
    rows: usize,
    cols: usize,
    depths: &[usize],
    instances: usize,
    shots: usize,
    theta_pi: f64,
    phi_pi: f64,
    resolved: &Resolved,
) -> Result<Vec<PathBuf>> {
    if depths.is_empty() {
        return Err(Error::Config("depths must name at least one circuit depth".into()));
    }
    if instances == 0 || shots == 0 {
        return Err(Error::Config("instances and shots must be positive".into()));
    }
    let mut written = Vec::new();
    for &depth in depths {
        for instance in 0..instances {
            let params = rqc::RqcParams {
                rows,
                cols,
                depth,
                theta: theta_pi * std::f64::consts::PI,
                phi: phi_pi * std::f64::consts::PI,
            };
            let circuit_seed = child_seed(resolved.seed, &format!("rqc-circuit-d{depth}-i{instance}"));
            let state = rqc::simulate(&params, circuit_seed)?;
            let mut shot_rng = stream(resolved.seed, &format!("rqc-shots-d{depth}-i{instance}"));
            let snapshots =
                rqc::sample_bitstrings(&state, (rows, cols), shots, &mut shot_rng)?;
            let meta = serde_json::json!({
                "generator": "rqc",
                "rows": rows,
                "cols": cols,
                "depth": depth,
                "instance": instance,
                "theta_pi": theta_pi,
                "phi_pi": phi_pi,
                "shots": shots,
                "circuit_seed": circuit_seed,
                "seed": resolved.seed,
            });
            let path = resolved.out.join(format!("rqc_d{depth}_i{instance}.qsnp"));
            write_snapshots(&path, &snapshots, &meta)?;
            written.push(path);
        }
    }
    Ok(written)
}

fn parity_files(
    rows: usize,
    cols: usize,
    k: usize,
    count: usize,
    resolved: &Resolved,
) -> Result<Vec<PathBuf>> {
    if count == 0 {
        return Err(Error::Config("count must be positive".into()));
    }
    let mut written = Vec::new();
    for (class, tag) in [(parity::ParityClass::A, "a"), (parity::ParityClass::B, "b")] {
        let mut rng = stream(resolved.seed, &format!("parity-{tag}"));
        let snapshots = parity::sample_parity_class(rows, cols, k, class, count, &mut rng)?;
        let meta = serde_json::json!({
            "generator": "parity",
            "rows": rows,
            "cols": cols,
            "k": k,
            "count": count,
            "class": tag,
            "seed": resolved.seed,
        });
        let path = resolved.out.join(format!("parity_{tag}_k{k}.qsnp"));
        write_snapshots(&path, &snapshots, &meta)?;
        written.push(path);
    }
    Ok(written)
}
