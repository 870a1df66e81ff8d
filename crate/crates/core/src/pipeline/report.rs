use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use super::select::{comparison, io_write, load_selection};
use super::survival::{case_dir, read_stratification};
use super::{create_dir, Manifest, PipelineConfig, Status};
use crate::corpus::{self, GliomaLabel, GliomaType};
use crate::coxlasso;
use crate::error::Result;
use crate::netselect::{self, NodeAnnotations};
use crate::survstrat::RiskGroup;

/// Consolidated summary tables and annotated networks from the outputs of
/// the earlier stages. Survival outputs are optional.
pub fn run_report(cfg: &PipelineConfig) -> Result<Status> {
    cfg.validate()?;
    let clin = cfg.load_clinical()?;
    let expr = cfg.load_preprocessed()?;
    let base = cfg.stage_dir("report");
    let mut outputs = Vec::new();

    for &scheme in &cfg.schemes {
        let selections = load_selection(cfg, scheme)?;
        let dir = base.join(scheme.to_string());
        create_dir(&dir)?;
        let cmp = comparison(selections.iter().map(|s| (s.glioma_type.to_string(), s.selected.clone())))?;

        let mut prognostic = BTreeSet::new();
        for &case in &cfg.cases {
            let path = case_dir(cfg, scheme, case).join("cox_fit.tsv");
            if path.exists() {
                let fit = coxlasso::read_cox_fit(&path)?;
                prognostic.extend(fit.active().into_iter().map(|(g, _)| g.to_string()));
            }
        }

        let summary = dir.join("summary.tsv");
        io_write(&summary, |w| {
            writeln!(w, "type\tn_samples\tn_selected\tn_edges\tn_hubs\tn_weight_hubs\tn_count_hubs\tn_exclusive\tpct_exclusive")?;
            for s in &selections {
                let name = s.glioma_type.to_string();
                let n = corpus::build_cohort(&expr, &clin, scheme, s.glioma_type).map_or(0, |c| c.n_samples());
                let excl = cmp.exclusive(&name).map_or(0, BTreeSet::len);
                let pct = cmp.exclusive_pct(&name).unwrap_or(0.0);
                writeln!(
                    w,
                    "{name}\t{n}\t{}\t{}\t{}\t{}\t{}\t{excl}\t{pct}",
                    s.selected.len(),
                    s.network.edges().len(),
                    s.ranking.hubs().len(),
                    s.ranking.weight_hubs().len(),
                    s.ranking.count_hubs().len()
                )?;
            }
            Ok(())
        })?;
        outputs.push(summary);

        let exclusive = dir.join("exclusive.tsv");
        io_write(&exclusive, |w| {
            writeln!(w, "type\tgene\thub\tprognostic")?;
            for s in &selections {
                let name = s.glioma_type.to_string();
                let hubs = s.ranking.hubs();
                for g in cmp.exclusive(&name).into_iter().flatten() {
                    writeln!(w, "{name}\t{g}\t{}\t{}", hubs.contains(g), prognostic.contains(g))?;
                }
            }
            Ok(())
        })?;
        outputs.push(exclusive);

        for s in &selections {
            let name = s.glioma_type.to_string();
            let excl = cmp.exclusive(&name)?.clone();
            let notes = NodeAnnotations {
                exclusive: excl.clone(),
                hubs: s.ranking.hubs(),
                prognostic: prognostic.clone(),
            };
            let tdir = dir.join(&name);
            create_dir(&tdir)?;
            let sub = netselect::induced_subgraph(&s.network, &s.selected);
            let seeds: Vec<&String> = excl.iter().collect();
            let hood = netselect::neighborhood_subgraph(&s.network, &seeds)?;
            let files = [
                (tdir.join("annotated.dot"), &sub, true),
                (tdir.join("annotated.graphml"), &sub, false),
                (tdir.join("exclusive_neighborhood.dot"), &hood, true),
                (tdir.join("exclusive_neighborhood.graphml"), &hood, false),
            ];
            for (path, net, dot) in files {
                if dot {
                    io_write(&path, |w| netselect::write_dot(w, net, &notes))?;
                } else {
                    io_write(&path, |w| netselect::write_graphml(w, net, &notes))?;
                }
                outputs.push(path);
            }
        }

        // risk-group composition by glioma type
        let labels: BTreeMap<&str, GliomaLabel> =
            clin.records().iter().map(|r| (r.sample_id.as_str(), r.label(scheme))).collect();
        for &case in &cfg.cases {
            let strat_path = case_dir(cfg, scheme, case).join("stratification.tsv");
            if !strat_path.exists() {
                continue;
            }
            let strat = read_stratification(&strat_path)?;
            let mut counts: BTreeMap<(GliomaType, RiskGroup), usize> = BTreeMap::new();
            for (id, g) in strat.sample_ids.iter().zip(&strat.group) {
                if let Some(t) = labels.get(id.as_str()).and_then(|l| l.as_type()) {
                    *counts.entry((t, *g)).or_default() += 1;
                }
            }
            let path = dir.join(format!("composition_{case}.tsv"));
            io_write(&path, |w| {
                writeln!(w, "# threshold={} source={}", strat.threshold, strat.threshold_source)?;
                writeln!(w, "type\tlow\thigh\tpct_low\tpct_high")?;
                let total = |g| counts.iter().filter(|((_, x), _)| *x == g).map(|(_, c)| c).sum::<usize>();
                let (tl, th) = (total(RiskGroup::Low), total(RiskGroup::High));
                for t in GliomaType::TYPES {
                    let l = counts.get(&(t, RiskGroup::Low)).copied().unwrap_or(0);
                    let h = counts.get(&(t, RiskGroup::High)).copied().unwrap_or(0);
                    let pct = |c: usize, of: usize| if of == 0 { 0.0 } else { 100.0 * c as f64 / of as f64 };
                    writeln!(w, "{t}\t{l}\t{h}\t{}\t{}", pct(l, tl), pct(h, th))?;
                }
                writeln!(w, "total\t{tl}\t{th}\t100\t100")
            })?;
            outputs.push(path);
        }
    }

    create_dir(&base)?;
    Manifest::new("report", cfg).outputs(&base, &outputs)?.write(&base)?;
    Ok(Status::Success)
}
