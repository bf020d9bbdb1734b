use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use microcavity::analysis::{analyze_mode, classify_mode, compare_pair, self_energy, ModeAnalysis, PairComparison};
use microcavity::geometry::EllipseGeometry;
use microcavity::husimi::{husimi_incident, husimi_peak};
use microcavity::raydyn::{critical_line, psos_sample, separatrix_curve, BirkhoffCoord};
use microcavity::tracker::{
    check_collisions, detect_crossings, refine_grid, track_mode, write_trajectories_csv, CrossingClass, CrossingReport,
    ModeTrajectory, DELTA_CROSS,
};
use microcavity::wavesolver::{quality_factor_of, Kind, ModeLabel};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::svg::{self, Frame, Series};

/// Separatrix samples in the overlay; a multiple of 4 so the minor-axis
/// apex is on the grid.
const SEPARATRIX_SAMPLES: usize = 512;

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(dir, name, &text)
}

fn check_ecc(ecc: f64) -> Result<()> {
    if !(0.0..=0.99).contains(&ecc) {
        bail!("eccentricity {ecc} outside [0, 0.99]");
    }
    Ok(())
}

fn parse_label(s: &str) -> Result<(u32, u32)> {
    let (m, l) = s.split_once(',').ok_or_else(|| anyhow!("label '{s}' is not of the form m,l"))?;
    Ok((m.trim().parse()?, l.trim().parse()?))
}

fn parse_kind(s: &str) -> Result<Kind> {
    match s {
        "open" => Ok(Kind::Open),
        "closed" => Ok(Kind::Closed),
        _ => bail!("kind must be 'open' or 'closed', got '{s}'"),
    }
}

// ---------------------------------------------------------------------------
// psos

#[derive(Serialize)]
struct PsosOverlay {
    e: f64,
    n: f64,
    p_c: f64,
    /// Largest separatrix momentum; absent for the circle.
    separatrix_max: Option<f64>,
    /// `separatrix_max − p_c`.
    apex_gap: Option<f64>,
    separatrix: Vec<(f64, f64)>,
    failed_seeds: Vec<usize>,
}

/// Seeds on two vertical lines, through the major- and minor-axis ends.
fn psos_seeds(count: usize) -> Vec<BirkhoffCoord<f64>> {
    (0..count)
        .map(|i| {
            let s = if i % 2 == 0 { 0.0 } else { 0.25 };
            let p = -0.97 + 1.94 * (i as f64 + 0.5) / count as f64;
            BirkhoffCoord::new(s, p)
        })
        .collect()
}

pub fn psos(cfg: &RunConfig, ecc: f64, seeds: usize, bounces: usize) -> Result<bool> {
    check_ecc(ecc)?;
    if seeds == 0 {
        bail!("need at least one seed");
    }
    let g = EllipseGeometry::new(ecc, 1.0)?;
    let p_c = critical_line(cfg.n)?;
    let mut csv = create(&cfg.out, "psos.csv")?;
    writeln!(csv, "seed,bounce,s,p")?;
    let mut points = Vec::new();
    let mut failed = Vec::new();
    for (i, seed) in psos_seeds(seeds).into_iter().enumerate() {
        let sample = psos_sample(&g, &[seed], bounces);
        if !sample.failures.is_empty() {
            failed.push(i);
        }
        for (b, x) in sample.points.iter().enumerate() {
            writeln!(csv, "{i},{b},{:.12},{:.12}", x.s, x.p)?;
            points.push((x.s, x.p));
        }
    }
    csv.flush()?;

    let (sep, sep_max) = if g.is_circle() {
        (Vec::new(), None)
    } else {
        let c = separatrix_curve(&g, SEPARATRIX_SAMPLES)?;
        (c.points(), Some(c.max_abs_p()))
    };
    let overlay = PsosOverlay {
        e: ecc,
        n: cfg.n,
        p_c,
        separatrix_max: sep_max,
        apex_gap: sep_max.map(|m| m - p_c),
        separatrix: sep.clone(),
        failed_seeds: failed,
    };
    write_json(&cfg.out, "psos_overlay.json", &overlay)?;

    let frame = Frame { x: (0.0, 1.0), y: (-1.0, 1.0) };
    let mut layers = vec![Series { points, line: false, color: "black" }];
    layers.push(Series { points: sep, line: false, color: "red" });
    for pc in [p_c, -p_c] {
        layers.push(Series { points: vec![(0.0, pc), (1.0, pc)], line: true, color: "blue" });
    }
    write_text(&cfg.out, "psos.svg", &svg::plot(&frame, &format!("PSOS e = {ecc}"), &layers))?;
    match overlay.apex_gap {
        Some(gap) => println!("e = {ecc}: separatrix apex {:.6}, critical line {p_c:.6}, gap {gap:+.3e}", sep_max.unwrap()),
        None => println!("e = {ecc}: circle, no separatrix"),
    }
    Ok(true)
}

// ---------------------------------------------------------------------------
// tracking shared by modes, sweep, husimi and analyze

/// Tracks each `(label, kind)` concurrently on the refined grid and returns
/// the trajectories restricted to the requested points, in input order.
fn track_all(cfg: &RunConfig, requested: &[f64], jobs: &[(ModeLabel, Kind)]) -> Result<Vec<ModeTrajectory>> {
    let tc = cfg.track_config();
    let (grid, index) = refine_grid(requested, tc.max_step)?;
    let out: Result<Vec<_>, _> = jobs
        .par_iter()
        .map(|&(label, kind)| track_mode(&grid, label, kind, &tc).map(|t| t.subsample(&index)))
        .collect();
    let out = out?;
    for kind in [Kind::Closed, Kind::Open] {
        let same: Vec<ModeTrajectory> = out.iter().filter(|t| t.kind == kind).cloned().collect();
        check_collisions(&same)?;
    }
    Ok(out)
}

fn report_truncations(trajs: &[ModeTrajectory]) -> bool {
    let mut clean = true;
    for t in trajs {
        if let Some(tr) = &t.truncation {
            clean = false;
            eprintln!("truncated: {} {} at e = {}: {}", t.label, t.kind, tr.e, tr.reason);
        }
    }
    clean
}

fn both_kinds(labels: &[ModeLabel]) -> Vec<(ModeLabel, Kind)> {
    labels.iter().flat_map(|&l| [(l, Kind::Closed), (l, Kind::Open)]).collect()
}

// ---------------------------------------------------------------------------
// modes

pub fn modes(cfg: &RunConfig, ecc: f64) -> Result<bool> {
    check_ecc(ecc)?;
    let trajs = track_all(cfg, &[ecc], &both_kinds(&cfg.mode_labels()))?;
    let mut csv = create(&cfg.out, "modes.csv")?;
    writeln!(csv, "m,l,kind,parity,e,re_kr,im_kr,q,residual,elements")?;
    for t in &trajs {
        if let Some(r) = t.resonances.last().filter(|_| !t.is_truncated()) {
            let q = match t.kind {
                Kind::Open => quality_factor_of(r.k).map_or(f64::NAN, |q| q),
                Kind::Closed => f64::INFINITY,
            };
            writeln!(
                csv,
                "{},{},{},{},{},{:.15e},{:.15e},{:.6e},{:.3e},{}",
                t.label.m, t.label.l, t.kind, t.label.parity, ecc, r.k.re, r.k.im, q, r.residual, r.elements
            )?;
        }
    }
    csv.flush()?;
    Ok(report_truncations(&trajs))
}

// ---------------------------------------------------------------------------
// sweep

#[derive(Serialize)]
struct CrossingSummary {
    delta: f64,
    closed_crossings: usize,
    closed_avoided: usize,
    open_crossings: usize,
    open_avoided: usize,
    reports: Vec<CrossingReport>,
}

/// Crossing reports for every same-kind, same-parity pair on their common
/// solved prefix.
pub fn crossing_reports(trajs: &[ModeTrajectory]) -> Result<Vec<CrossingReport>> {
    let mut out = Vec::new();
    for (i, a) in trajs.iter().enumerate() {
        for b in &trajs[i + 1..] {
            if a.kind != b.kind || a.label.parity != b.label.parity {
                continue;
            }
            let n = a.len().min(b.len());
            if n < 2 {
                continue;
            }
            out.push(detect_crossings(&a.prefix(n), &b.prefix(n), DELTA_CROSS)?);
        }
    }
    Ok(out)
}

pub fn sweep(cfg: &RunConfig) -> Result<bool> {
    let labels = cfg.mode_labels();
    let trajs = track_all(cfg, &cfg.requested_grid(), &both_kinds(&labels))?;
    write_json(&cfg.out, "run_config.json", cfg)?;
    let mut csv = create(&cfg.out, "trajectories.csv")?;
    write_trajectories_csv(&mut csv, &trajs)?;
    csv.flush()?;

    let mut se_csv = create(&cfg.out, "self_energy.csv")?;
    writeln!(se_csv, "e,m,l,s_e")?;
    let mut se_series = Vec::new();
    for pair in trajs.chunks(2) {
        let (closed, open) = (&pair[0], &pair[1]);
        let n = closed.len().min(open.len());
        let se = self_energy(&closed.prefix(n), &open.prefix(n))?;
        for (e, v) in se.e_grid.iter().zip(&se.values) {
            writeln!(se_csv, "{e},{},{},{v:.15e}", se.label.m, se.label.l)?;
        }
        se_series.push(se);
    }
    se_csv.flush()?;

    let reports = crossing_reports(&trajs)?;
    let count = |kind: Kind, class: CrossingClass| -> usize {
        reports.iter().filter(|r| r.kind == kind).map(|r| r.count(class)).sum()
    };
    let summary = CrossingSummary {
        delta: DELTA_CROSS,
        closed_crossings: count(Kind::Closed, CrossingClass::Crossing),
        closed_avoided: count(Kind::Closed, CrossingClass::AvoidedCrossing),
        open_crossings: count(Kind::Open, CrossingClass::Crossing),
        open_avoided: count(Kind::Open, CrossingClass::AvoidedCrossing),
        reports,
    };
    write_json(&cfg.out, "crossings.json", &summary)?;

    let series: Vec<Series> = se_series
        .iter()
        .enumerate()
        .map(|(i, s)| Series { points: s.e_grid.iter().cloned().zip(s.values.iter().cloned()).collect(), line: true, color: svg::color(i) })
        .collect();
    let frame = Frame { x: (cfg.e_start, cfg.e_end), y: svg::range(se_series.iter().flat_map(|s| s.values.iter().cloned())) };
    write_text(&cfg.out, "self_energy.svg", &svg::plot(&frame, "S_e vs e", &series))?;
    println!(
        "{} labels; closed: {} crossings, {} avoided; open: {} crossings, {} avoided",
        labels.len(),
        summary.closed_crossings,
        summary.closed_avoided,
        summary.open_crossings,
        summary.open_avoided
    );
    Ok(report_truncations(&trajs))
}

// ---------------------------------------------------------------------------
// husimi

#[derive(Serialize)]
struct HusimiSummary {
    label: ModeLabel,
    kind: Kind,
    e: f64,
    re_kr: f64,
    im_kr: f64,
    peak: (f64, f64),
    class: Option<String>,
}

pub fn husimi(cfg: &RunConfig, ecc: f64, label: Option<&str>, kind: &str) -> Result<bool> {
    check_ecc(ecc)?;
    let kind = parse_kind(kind)?;
    let ml = match label {
        Some(s) => parse_label(s)?,
        None => cfg.labels[0],
    };
    let label = cfg.label(ml);
    let trajs = track_all(cfg, &[ecc], &[(label, kind)])?;
    let t = &trajs[0];
    if t.is_truncated() || t.is_empty() {
        report_truncations(&trajs);
        bail!("could not follow {label} to e = {ecc}");
    }
    let r = t.resonances.last().unwrap();
    let h = husimi_incident(r, cfg.husimi_grid())?;
    let mut csv = create(&cfg.out, "husimi.csv")?;
    writeln!(csv, "s,p,weight")?;
    for i in 0..h.ns {
        for j in 0..h.np {
            writeln!(csv, "{:.8},{:.8},{:.10e}", h.s_center(i), h.p_center(j), h.get(i, j))?;
        }
    }
    csv.flush()?;
    let g = &r.geometry;
    let class = if g.is_circle() { None } else { Some(classify_mode(&h, g, cfg.tau)?.class.to_string()) };
    let summary = HusimiSummary { label, kind, e: ecc, re_kr: r.k.re, im_kr: r.k.im, peak: husimi_peak(&h)?, class };
    write_json(&cfg.out, "husimi.json", &summary)?;

    let frame = Frame { x: (0.0, 1.0), y: (-1.0, 1.0) };
    let mut overlays = Vec::new();
    if !g.is_circle() {
        overlays.push(Series { points: separatrix_curve(g, SEPARATRIX_SAMPLES)?.points(), line: false, color: "red" });
    }
    let p_c = cfg.critical_p();
    for pc in [p_c, -p_c] {
        overlays.push(Series { points: vec![(0.0, pc), (1.0, pc)], line: true, color: "blue" });
    }
    let title = format!("Husimi {label} {kind} e = {ecc}");
    write_text(&cfg.out, "husimi.svg", &svg::heatmap(&frame, &title, h.ns, h.np, &h.weights, &overlays))?;
    println!("{label} {kind} e = {ecc}: kR = {:.10}, peak at {:?}, class {:?}", r.k, summary.peak, summary.class);
    Ok(true)
}

// ---------------------------------------------------------------------------
// analyze

fn pair_file_name(p: &PairComparison) -> String {
    let (a, b) = p.labels;
    format!("pair_{}_{}__{}_{}.json", a.m, a.l, b.m, b.l)
}

pub fn analyze(cfg: &RunConfig) -> Result<bool> {
    if cfg.pairs.is_empty() {
        eprintln!("warning: no pairs configured, nothing to analyze");
        return Ok(true);
    }
    let mut needed: Vec<(u32, u32)> = cfg.pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
    needed.sort_unstable();
    needed.dedup();
    let labels: Vec<ModeLabel> = needed.iter().map(|&x| cfg.label(x)).collect();
    let requested: Vec<f64> = cfg.requested_grid().into_iter().filter(|&e| e <= cfg.e_max + 1e-12).collect();
    if requested.len() < 2 {
        bail!("config: fewer than two grid points below e_max = {}", cfg.e_max);
    }
    let trajs = track_all(cfg, &requested, &both_kinds(&labels))?;
    let clean = report_truncations(&trajs);
    let analyses: Vec<ModeAnalysis> = trajs
        .chunks(2)
        .map(|pair| {
            let n = pair[0].len().min(pair[1].len());
            analyze_mode(&pair[0].prefix(n), &pair[1].prefix(n), cfg.husimi_grid(), cfg.critical_p(), cfg.e_max)
        })
        .collect::<Result<_, _>>()?;
    let find = |x: (u32, u32)| &analyses[needed.binary_search(&x).unwrap()];
    let mut comparisons = Vec::new();
    for &(a, b) in &cfg.pairs {
        let pc = compare_pair(find(a), find(b))?;
        write_json(&cfg.out, &pair_file_name(&pc), &pc)?;
        println!(
            "({},{})-({},{}): e_zero {:?}, e_dbmin {:?}, min D_B {:?}",
            a.0,
            a.1,
            b.0,
            b.1,
            pc.e_zero,
            pc.e_dbmin,
            pc.min_d_b()
        );
        comparisons.push(pc);
    }
    write_text(&cfg.out, "analysis.svg", &overview(&comparisons, cfg.e_start, cfg.e_max))?;
    Ok(clean)
}

/// ΔS_e, D_B and Q panels, one colour per pair.
fn overview(pcs: &[PairComparison], e0: f64, e1: f64) -> String {
    let curve = |p: &PairComparison, v: &[f64]| p.e_grid.iter().cloned().zip(v.iter().cloned()).collect::<Vec<_>>();
    let dse: Vec<Series> = pcs.iter().enumerate().map(|(i, p)| Series { points: curve(p, &p.delta_se), line: true, color: svg::color(i) }).collect();
    let db: Vec<Series> = pcs
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let v: Vec<f64> = p.d_b.iter().map(|d| d.unwrap_or(f64::NAN)).collect();
            Series { points: curve(p, &v), line: true, color: svg::color(i) }
        })
        .collect();
    let q: Vec<Series> = pcs
        .iter()
        .enumerate()
        .flat_map(|(i, p)| {
            [
                Series { points: curve(p, &p.q_j), line: true, color: svg::color(i) },
                Series { points: curve(p, &p.q_k), line: false, color: svg::color(i) },
            ]
        })
        .collect();
    let fr = |s: &[Series]| Frame { x: (e0, e1), y: svg::range(s.iter().flat_map(|s| s.points.iter().map(|p| p.1))) };
    let (f1, f2, f3) = (fr(&dse), fr(&db), fr(&q));
    svg::panels(&[(&f1, "|ΔS_e|", &dse), (&f2, "D_B", &db), (&f3, "Q", &q)])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_and_kind_parsing() {
        assert_eq!(parse_label("5, 3").unwrap(), (5, 3));
        assert!(parse_label("5").is_err());
        assert_eq!(parse_kind("closed").unwrap(), Kind::Closed);
        assert!(parse_kind("tm").is_err());
    }

    #[test]
    fn seeds_avoid_grazing() {
        let s = psos_seeds(9);
        assert_eq!(s.len(), 9);
        assert!(s.iter().all(|x| x.p.abs() < 0.97));
    }
}
