//! Wall-clock scaling study: AD and LAD pipelines timed across size grids,
//! with log-log exponents fitted on per-point median totals.
//!
//! The LAD grid sweeps n at fixed m and m at fixed n; the AD grid runs at a
//! quarter of each LAD n, since the dense pipeline stops being affordable
//! where the landmark one is still warming up. Every timed region excludes
//! sampling and includes model assembly (`build`) or the eigensolve plus
//! embedding (`spectrum`).

use std::collections::BTreeMap;

use lad::diffusion::{ad_embed, build_ad, build_lad, lad_embed};
use lad::landmarks::uniform_subset;
use lad::manifolds::PairedDataset;

use crate::config::Settings;
use crate::experiments::common::{
    log_log_slope, median, resolve_eps, sensor_pair, spectral_options, SensorPair,
};
use crate::experiments::Outcome;
use crate::manifest::timed;
use crate::table::Table;
use crate::Result;

const LANDMARK_SALT: u64 = 0x4245_4e43;

struct Measurement {
    build: Vec<f64>,
    spectrum: Vec<f64>,
    eps1: f64,
    eps2: f64,
}

impl Measurement {
    fn median_total(&self) -> f64 {
        let totals: Vec<f64> = self
            .build
            .iter()
            .zip(&self.spectrum)
            .map(|(b, s)| b + s)
            .collect();
        median(&totals)
    }
}

fn dataset_for(
    s: &Settings,
    pair: &SensorPair,
    cache: &mut BTreeMap<usize, PairedDataset>,
    n: usize,
) -> Result<PairedDataset> {
    if let Some(ds) = cache.get(&n) {
        return Ok(ds.clone());
    }
    let ds = lad::manifolds::sample_pair(
        &pair.gen1,
        &pair.gen2,
        n,
        &s.density(),
        s.seed ^ (n as u64),
    )?;
    cache.insert(n, ds.clone());
    Ok(ds)
}

fn measure_lad(s: &Settings, ds: &PairedDataset, m: usize) -> Result<Measurement> {
    let e1 = resolve_eps(s.eps1, ds.sensor1.view())?;
    let e2 = resolve_eps(s.eps2, ds.sensor2.view())?;
    let cfg1 = lad::kernels::KernelConfig::gaussian(e1)?;
    let cfg2 = lad::kernels::KernelConfig::gaussian(e2)?;
    let opts = spectral_options();
    let mut out = Measurement {
        build: Vec::new(),
        spectrum: Vec::new(),
        eps1: e1,
        eps2: e2,
    };
    for run in 0..(s.bench_warmup + s.bench_runs) {
        let seed = s.seed ^ LANDMARK_SALT ^ ((ds.len() as u64) << 20) ^ (m as u64);
        let (model, build_seconds) = timed(|| -> Result<_> {
            let set = uniform_subset(ds, m, seed)?;
            Ok(build_lad(ds, &set, &cfg1, &cfg2, s.alpha)?)
        });
        let model = model?;
        let (embed, spectrum_seconds) = timed(|| lad_embed(&model, 3, s.t, &opts));
        embed?;
        if run >= s.bench_warmup {
            out.build.push(build_seconds);
            out.spectrum.push(spectrum_seconds);
        }
    }
    Ok(out)
}

fn measure_ad(s: &Settings, ds: &PairedDataset) -> Result<Measurement> {
    let e1 = resolve_eps(s.eps1, ds.sensor1.view())?;
    let e2 = resolve_eps(s.eps2, ds.sensor2.view())?;
    let cfg1 = lad::kernels::KernelConfig::gaussian(e1)?;
    let cfg2 = lad::kernels::KernelConfig::gaussian(e2)?;
    let opts = spectral_options();
    let mut out = Measurement {
        build: Vec::new(),
        spectrum: Vec::new(),
        eps1: e1,
        eps2: e2,
    };
    for run in 0..(s.bench_warmup + s.bench_runs) {
        let (model, build_seconds) = timed(|| build_ad(ds, &cfg1, &cfg2));
        let model = model?;
        let (embed, spectrum_seconds) = timed(|| ad_embed(&model, 3, s.t, &opts));
        embed?;
        if run >= s.bench_warmup {
            out.build.push(build_seconds);
            out.spectrum.push(spectrum_seconds);
        }
    }
    Ok(out)
}

pub fn run(s: &Settings) -> Result<Outcome> {
    let mut out = Outcome::new();
    let pair = sensor_pair(s)?;
    let mut cache = BTreeMap::new();

    let mut runs = Table::new(&[
        "seed", "trial", "alpha", "model", "m", "n", "eps1", "eps2", "build_seconds",
        "spectrum_seconds", "total_seconds",
    ]);
    let mut summary = Table::new(&[
        "seed", "trials", "alpha", "model", "m", "n", "eps1", "eps2", "median_build_seconds",
        "median_spectrum_seconds", "median_total_seconds",
    ]);

    let record = |table_runs: &mut Table,
                      table_summary: &mut Table,
                      model: &str,
                      n: usize,
                      m: usize,
                      meas: &Measurement| {
        for (run, (b, sp)) in meas.build.iter().zip(&meas.spectrum).enumerate() {
            table_runs
                .row()
                .push(s.seed)
                .push(run)
                .push(s.alpha)
                .push(model)
                .push(m)
                .push(n)
                .push(meas.eps1)
                .push(meas.eps2)
                .push(*b)
                .push(*sp)
                .push(b + sp)
                .finish();
        }
        table_summary
            .row()
            .push(s.seed)
            .push(meas.build.len())
            .push(s.alpha)
            .push(model)
            .push(m)
            .push(n)
            .push(meas.eps1)
            .push(meas.eps2)
            .push(median(&meas.build))
            .push(median(&meas.spectrum))
            .push(meas.median_total())
            .finish();
    };

    // LAD across n at the configured m.
    let mut lad_n_totals = Vec::new();
    let (status_lad_seconds, lad_seconds) = timed(|| -> Result<()> {
        for &n in &s.n_list {
            let ds = dataset_for(s, &pair, &mut cache, n)?;
            let meas = measure_lad(s, &ds, s.m)?;
            lad_n_totals.push(meas.median_total());
            record(&mut runs, &mut summary, "lad", n, s.m, &meas);
        }
        Ok(())
    });
    out.record_stage("lad_n_sweep", lad_seconds);
    status_lad_seconds?;

    // LAD across m at the configured n.
    let mut lad_m_totals = Vec::new();
    let (status_ladm_seconds, ladm_seconds) = timed(|| -> Result<()> {
        let ds = dataset_for(s, &pair, &mut cache, s.n)?;
        for &m in &s.m_list {
            let meas = measure_lad(s, &ds, m)?;
            lad_m_totals.push(meas.median_total());
            record(&mut runs, &mut summary, "lad", s.n, m, &meas);
        }
        Ok(())
    });
    out.record_stage("lad_m_sweep", ladm_seconds);
    status_ladm_seconds?;

    // AD across a quarter of each LAD n.
    let ad_ns: Vec<usize> = s.n_list.iter().map(|&n| n / 4).collect();
    let mut ad_totals = Vec::new();
    let (status_ad_seconds, ad_seconds) = timed(|| -> Result<()> {
        for &n in &ad_ns {
            let ds = dataset_for(s, &pair, &mut cache, n)?;
            let meas = measure_ad(s, &ds)?;
            ad_totals.push(meas.median_total());
            record(&mut runs, &mut summary, "ad", n, 0, &meas);
        }
        Ok(())
    });
    out.record_stage("ad_n_sweep", ad_seconds);
    status_ad_seconds?;

    let ns: Vec<f64> = s.n_list.iter().map(|&n| n as f64).collect();
    let ms: Vec<f64> = s.m_list.iter().map(|&m| m as f64).collect();
    let ad_ns_f: Vec<f64> = ad_ns.iter().map(|&n| n as f64).collect();
    let mut exponents = Table::new(&["seed", "model", "varies", "fixed", "exponent"]);
    for (model, varies, fixed, xs, ys) in [
        ("lad", "n", s.m, &ns, &lad_n_totals),
        ("lad", "m", s.n, &ms, &lad_m_totals),
        ("ad", "n", 0, &ad_ns_f, &ad_totals),
    ] {
        exponents
            .row()
            .push(s.seed)
            .push(model)
            .push(varies)
            .push(fixed)
            .push(log_log_slope(xs, ys)?)
            .finish();
    }

    out.timing_tables.push(("runs", runs));
    out.timing_tables.push(("summary", summary));
    out.timing_tables.push(("exponents", exponents));
    Ok(out)
}

/// Fitted exponent for (model, varying size).
pub fn exponent_of(out: &Outcome, model: &str, varies: &str) -> f64 {
    let t = out.table("exponents");
    for i in t.rows_where("model", model) {
        if t.cell(i, "varies") == varies {
            return t.value(i, "exponent");
        }
    }
    panic!("no exponent row for {model}/{varies}");
}

/// Median total seconds for one measured point.
pub fn total_of(out: &Outcome, model: &str, n: usize, m: usize) -> f64 {
    let t = out.table("summary");
    let n_text = format!("{n}");
    let m_text = format!("{m}");
    for i in t.rows_where("model", model) {
        if t.cell(i, "n") == n_text && t.cell(i, "m") == m_text {
            return t.value(i, "median_total_seconds");
        }
    }
    panic!("no summary row for {model} at n={n}, m={m}");
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Experiment;

    #[test]
    fn small_grids_produce_fits_and_summaries() {
        let mut s = Settings::defaults(Experiment::BenchTiming, false);
        s.n_list = vec![400, 800];
        s.m_list = vec![32, 64];
        s.n = 800;
        s.m = 32;
        s.bench_runs = 1;
        s.bench_warmup = 0;
        s.validate().unwrap();
        let out = run(&s).unwrap();
        // 2 lad-n + 2 lad-m + 2 ad points, one run each.
        assert_eq!(out.table("runs").len(), 6);
        assert_eq!(out.table("summary").len(), 6);
        assert_eq!(out.table("exponents").len(), 3);
        assert!(total_of(&out, "ad", 200, 0) > 0.0);
        assert!(total_of(&out, "lad", 400, 32) > 0.0);
        let _ = exponent_of(&out, "ad", "n");
    }
}
