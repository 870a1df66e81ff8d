use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::{create_dir, Manifest, PipelineConfig, Status};
use crate::corpus::{self, ClinicalTable, ExpressionMatrix, GliomaType, Scheme};
use crate::error::{Error, Result};
use crate::glasso::{self, PrecisionMatrix};
use crate::netselect::{self, CohortTag, CrossRankStatus, GeneNetwork, HubRanking, NodeAnnotations, SetComparison};
use crate::preprocess;

/// Per-type products of the selection stage, as read back from disk.
pub(crate) struct TypeSelection {
    pub glioma_type: GliomaType,
    pub network: GeneNetwork,
    pub selected: BTreeSet<String>,
    pub ranking: HubRanking,
}

pub(crate) fn type_dir(cfg: &PipelineConfig, scheme: Scheme, t: GliomaType) -> PathBuf {
    cfg.stage_dir("select").join(scheme.to_string()).join(t.to_string())
}

fn fit_type(cfg: &PipelineConfig, expr: &ExpressionMatrix, clin: &ClinicalTable, scheme: Scheme, t: GliomaType) -> Result<(PrecisionMatrix, usize)> {
    let cohort = corpus::build_cohort(expr, clin, scheme, t)?;
    let s = preprocess::empirical_covariance(&cohort.expression)?;
    let prec = glasso::glasso_fit(s.view(), &cfg.glasso_config(cfg.rho))?.with_gene_ids(expr.gene_ids().to_vec())?;
    Ok((prec, cohort.n_samples()))
}

fn ranking_or_empty(net: &GeneNetwork, threshold: f64) -> Result<HubRanking> {
    match netselect::hub_ranking(net, threshold) {
        Ok(r) => Ok(r),
        Err(Error::NoConnectedVariables) => Ok(HubRanking {
            threshold,
            entries: Vec::new(),
        }),
        Err(e) => Err(e),
    }
}

pub(crate) fn io_write(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let run = || -> std::io::Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        body(&mut w)?;
        w.flush()
    };
    run().map_err(|e| Error::io(path, e))
}

pub(crate) fn comparison(named: impl IntoIterator<Item = (String, BTreeSet<String>)>) -> Result<SetComparison> {
    let sets: BTreeMap<String, BTreeSet<String>> = named.into_iter().collect();
    netselect::compare_sets(&sets)
}

fn write_comparison(path: &Path, cmp: &SetComparison) -> Result<()> {
    io_write(path, |w| cmp.write_tsv(w))
}

/// Rows `ranking hubs_of gene pct_w pct_c average`; genes missing from the
/// ranking network get `not_selected`.
fn write_cross_rank(path: &Path, pairs: &[(String, &HubRanking, String, BTreeSet<String>)]) -> Result<()> {
    io_write(path, |w| {
        writeln!(w, "ranking\thubs_of\tgene\tpct_w\tpct_c\taverage")?;
        for (rank_name, ranking, hub_name, hubs) in pairs {
            for c in netselect::cross_rank_lookup(ranking, hubs) {
                match c.status {
                    CrossRankStatus::Ranked {
                        pct_weight,
                        pct_count,
                        average,
                    } => writeln!(w, "{rank_name}\t{hub_name}\t{}\t{pct_weight}\t{pct_count}\t{average}", c.gene)?,
                    CrossRankStatus::NotSelected => {
                        writeln!(w, "{rank_name}\t{hub_name}\t{}\tnot_selected\tnot_selected\tnot_selected", c.gene)?
                    }
                }
            }
        }
        Ok(())
    })
}

pub(crate) fn load_selection(cfg: &PipelineConfig, scheme: Scheme) -> Result<Vec<TypeSelection>> {
    GliomaType::TYPES
        .iter()
        .map(|&t| {
            let dir = type_dir(cfg, scheme, t);
            let prec = glasso::read_triplets(dir.join("network.triplets"))?;
            let network = netselect::extract_network(&prec, glasso::GlassoConfig::default().zero_epsilon)
                .with_cohort(CohortTag { scheme, glioma_type: t });
            Ok(TypeSelection {
                glioma_type: t,
                network,
                selected: netselect::read_gene_list(dir.join("selected.txt"))?,
                ranking: netselect::read_hub_ranking(dir.join("hubs.tsv"), cfg.hub_threshold)?,
            })
        })
        .collect()
}

/// Fits one network per glioma type and scheme and derives selected genes,
/// hub rankings and the cross-type comparisons.
pub fn run_select(cfg: &PipelineConfig) -> Result<Status> {
    cfg.validate()?;
    let expr = cfg.load_preprocessed()?;
    let clin = cfg.load_clinical()?;
    let zero_eps = glasso::GlassoConfig::default().zero_epsilon;
    let base = cfg.stage_dir("select");
    let mut outputs = Vec::new();
    let mut status = Status::Success;
    let mut per_scheme: BTreeMap<Scheme, Vec<TypeSelection>> = BTreeMap::new();

    for &scheme in &cfg.schemes {
        let fits: Vec<(PrecisionMatrix, usize)> = GliomaType::TYPES
            .par_iter()
            .map(|&t| fit_type(cfg, &expr, &clin, scheme, t))
            .collect::<Result<_>>()?;
        let mut selections = Vec::new();
        for (&t, (prec, n)) in GliomaType::TYPES.iter().zip(&fits) {
            if !prec.converged {
                log::warn!("{scheme}/{t}: glasso stopped after {} sweeps without converging", prec.iterations);
                status = status.max(Status::NotConverged);
            }
            let network = netselect::extract_network(prec, zero_eps).with_cohort(CohortTag { scheme, glioma_type: t });
            let selected = netselect::select_variables(&network);
            if selected.len() < 2 {
                log::warn!("{scheme}/{t}: rho {} leaves {} connected genes", cfg.rho, selected.len());
            }
            log::info!("{scheme}/{t}: {n} samples, {} selected genes, {} edges", selected.len(), network.edges().len());
            let ranking = ranking_or_empty(&network, cfg.hub_threshold)?;
            let dir = type_dir(cfg, scheme, t);
            create_dir(&dir)?;
            let triplets = dir.join("network.triplets");
            glasso::write_triplets(&triplets, prec, zero_eps)?;
            let sel = dir.join("selected.txt");
            netselect::write_gene_list(&sel, &selected)?;
            let hubs = dir.join("hubs.tsv");
            netselect::write_hub_ranking(&hubs, &ranking)?;
            outputs.extend([triplets, sel, hubs]);
            selections.push(TypeSelection {
                glioma_type: t,
                network,
                selected,
                ranking,
            });
        }

        let selected_cmp = comparison(selections.iter().map(|s| (s.glioma_type.to_string(), s.selected.clone())))?;
        let hub_cmp = comparison(selections.iter().map(|s| (s.glioma_type.to_string(), s.ranking.hubs())))?;
        for s in &selections {
            let notes = NodeAnnotations {
                exclusive: selected_cmp.exclusive(&s.glioma_type.to_string())?.clone(),
                hubs: s.ranking.hubs(),
                prognostic: BTreeSet::new(),
            };
            let sub = netselect::induced_subgraph(&s.network, &s.selected);
            let dir = type_dir(cfg, scheme, s.glioma_type);
            let dot = dir.join("network.dot");
            io_write(&dot, |w| netselect::write_dot(w, &sub, &notes))?;
            let graphml = dir.join("network.graphml");
            io_write(&graphml, |w| netselect::write_graphml(w, &sub, &notes))?;
            outputs.extend([dot, graphml]);
        }
        let scheme_dir = base.join(scheme.to_string());
        let p1 = scheme_dir.join("comparison_selected.tsv");
        write_comparison(&p1, &selected_cmp)?;
        let p2 = scheme_dir.join("comparison_hubs.tsv");
        write_comparison(&p2, &hub_cmp)?;
        let mut pairs = Vec::new();
        for a in &selections {
            for b in &selections {
                if a.glioma_type != b.glioma_type {
                    pairs.push((a.glioma_type.to_string(), &a.ranking, b.glioma_type.to_string(), b.ranking.hubs()));
                }
            }
        }
        let p3 = scheme_dir.join("cross_rank.tsv");
        write_cross_rank(&p3, &pairs)?;
        outputs.extend([p1, p2, p3]);
        per_scheme.insert(scheme, selections);
    }

    if per_scheme.len() == 2 {
        let dir = base.join("schemes");
        create_dir(&dir)?;
        let (a, b) = (&per_scheme[&Scheme::Who2016], &per_scheme[&Scheme::Who2021]);
        for (sa, sb) in a.iter().zip(b) {
            let t = sa.glioma_type;
            let named = |x: &TypeSelection, scheme: Scheme, hubs: bool| {
                (scheme.to_string(), if hubs { x.ranking.hubs() } else { x.selected.clone() })
            };
            let p1 = dir.join(format!("{t}_selected.tsv"));
            write_comparison(&p1, &comparison([named(sa, Scheme::Who2016, false), named(sb, Scheme::Who2021, false)])?)?;
            let p2 = dir.join(format!("{t}_hubs.tsv"));
            write_comparison(&p2, &comparison([named(sa, Scheme::Who2016, true), named(sb, Scheme::Who2021, true)])?)?;
            let p3 = dir.join(format!("{t}_cross_rank.tsv"));
            write_cross_rank(
                &p3,
                &[
                    ("who2016".into(), &sa.ranking, "who2021".into(), sb.ranking.hubs()),
                    ("who2021".into(), &sb.ranking, "who2016".into(), sa.ranking.hubs()),
                ],
            )?;
            outputs.extend([p1, p2, p3]);
        }
    }

    create_dir(&base)?;
    let mut manifest = Manifest::new("select", cfg).input(&cfg.stage_dir("preprocess").join("expression.tsv"))?;
    if let Some(c) = &cfg.clinical {
        manifest = manifest.input(c)?;
    }
    manifest.outputs(&base, &outputs)?.write(&base)?;
    Ok(status)
}
