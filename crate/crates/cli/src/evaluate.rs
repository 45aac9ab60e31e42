use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chainhoi::config::RunConfig;
use chainhoi::data::io::{read_jsonl, InstructionGroups, SequenceRecord, MESH_DIR};
use chainhoi::evaluator::Evaluator;
use chainhoi::geometry::obj::load_obj;
use chainhoi::geometry::TriangleMesh;
use chainhoi::metrics::{align_labels, contact_distance, diversity, fid, fsr, multimodal_distance, optimal_contact_distance, penetration_score, r_precision, MetricReport, SequenceMetrics};
use chainhoi::repr::{decode_sequence, encode_sequence, ContactLabels, GlobalMotion, HoiSequence};
use chainhoi::skeleton::SkeletonSpec;
use clap::Args;

use crate::failure::{Failure, Outcome, ResultExt};

pub const DEFAULT_WINDOW: usize = 32;
const R_PRECISION_POOL: usize = 32;
const DIVERSITY_PAIRS: usize = 300;

#[derive(Args)]
pub struct EvaluateArgs {
    /// Generated sequences (JSONL).
    #[arg(long)]
    generated: PathBuf,
    /// Reference sequences (JSONL). A generated record takes the contact
    /// labels of the reference with the same id.
    #[arg(long)]
    references: PathBuf,
    /// Instruction groups (JSON); OCD falls back to CD without it.
    #[arg(long)]
    groups: Option<PathBuf>,
    /// Directory of `<object_id>.obj` meshes [default: meshes/ next to the references]
    #[arg(long)]
    mesh_dir: Option<PathBuf>,
    /// Evaluator checkpoint; enables FID, R-Precision, MultiModal Distance and Diversity.
    #[arg(long)]
    evaluator: Option<PathBuf>,
    /// Evaluator window length in frames.
    #[arg(long, default_value_t = DEFAULT_WINDOW)]
    window: usize,
    /// Writes the report as JSON here and as a text table next to it (`.txt`).
    #[arg(long)]
    report: Option<PathBuf>,
}

/// Busiest-window crops of `records`, re-encoded from their first frame.
pub fn windows(records: &[SequenceRecord], window: usize, spec: &SkeletonSpec) -> Outcome<Vec<HoiSequence>> {
    records
        .iter()
        .map(|r| {
            let seq = r.sequence().data()?;
            let labels = r.labels().data()?;
            if seq.len < window {
                return Err(Failure::data(format!("{} has {} frames, the evaluator window is {}", r.id, seq.len, window)));
            }
            crop(&seq, &labels, window, spec).classify()
        })
        .collect()
}

fn crop(seq: &HoiSequence, labels: &ContactLabels, window: usize, spec: &SkeletonSpec) -> chainhoi::Result<HoiSequence> {
    let start = labels.busiest_window(window);
    let end = start + window;
    let d = decode_sequence(seq, spec)?;
    let motion = GlobalMotion { positions: d.positions[start..end].to_vec(), rotations: d.rotations[start..end].to_vec() };
    encode_sequence(&motion, &d.objects[start..end], spec, seq.fps)
}

struct Meshes {
    dir: PathBuf,
    cache: HashMap<String, Arc<TriangleMesh>>,
}

impl Meshes {
    fn get(&mut self, object_id: &str) -> Outcome<Arc<TriangleMesh>> {
        if let Some(m) = self.cache.get(object_id) {
            return Ok(m.clone());
        }
        let path = self.dir.join(format!("{}.obj", object_id));
        let mesh = Arc::new(load_obj(&path).at(&path).data()?);
        self.cache.insert(object_id.to_string(), mesh.clone());
        Ok(mesh)
    }
}

fn score(
    rec: &SequenceRecord,
    refs: &HashMap<&str, &SequenceRecord>,
    groups: Option<&InstructionGroups>,
    membership: &HashMap<String, String>,
    meshes: &mut Meshes,
    spec: &SkeletonSpec,
) -> Outcome<SequenceMetrics> {
    let seq = rec.sequence().data()?;
    seq.validate(spec).data()?;
    let d = decode_sequence(&seq, spec).classify()?;
    let mesh = meshes.get(&rec.object_id)?;
    let labels = match refs.get(rec.id.as_str()) {
        Some(r) => align_labels(&r.labels().data()?, seq.len),
        None => rec.labels().data()?,
    };
    let cd = contact_distance(&d.positions, &labels, &mesh, &d.objects, spec).classify()?;
    let mut members = Vec::new();
    if let (Some(g), Some(gid)) = (groups, membership.get(&rec.id)) {
        for m in &g.get(gid).expect("membership names a group").members {
            members.push(refs[m.as_str()].labels().data()?);
        }
    }
    if members.is_empty() {
        members.push(labels);
    }
    let ocd = optimal_contact_distance(&d.positions, &members, &mesh, &d.objects, spec).classify()?;
    Ok(SequenceMetrics {
        id: rec.id.clone(),
        fsr: fsr(&d.positions, spec).classify()?,
        cd: cd.value,
        ocd: ocd.value,
        ps: penetration_score(&d.positions, &mesh, &d.objects, spec).data()?,
        labeled: cd.labeled,
    })
}

fn feature_metrics(report: &mut MetricReport, path: &Path, generated: &[SequenceRecord], references: &[SequenceRecord], window: usize, seed: u64) -> Outcome<()> {
    let ev = Evaluator::load(path).at(path).data()?;
    let spec = SkeletonSpec::default();
    let gen = windows(generated, window, &spec)?;
    let refs = windows(references, window, &spec)?;
    let gen_feats = ev.motion_features(&gen.iter().collect::<Vec<_>>()).classify()?;
    let ref_feats = ev.motion_features(&refs.iter().collect::<Vec<_>>()).classify()?;
    let texts: Vec<&str> = generated.iter().map(|r| r.text.as_str()).collect();
    let text_feats = ev.text_features(&texts).data()?;
    report.fid = Some(fid(&gen_feats, &ref_feats).classify()?);
    report.multimodal_distance = Some(multimodal_distance(&gen_feats, &text_feats).classify()?);
    if gen_feats.len() >= R_PRECISION_POOL {
        report.r_precision = Some(r_precision(&gen_feats, &text_feats, R_PRECISION_POOL, seed).classify()?);
    } else {
        log::warn!("R-Precision needs {} generated sequences, have {}", R_PRECISION_POOL, gen_feats.len());
    }
    if gen_feats.len() >= 2 {
        report.diversity = Some(diversity(&gen_feats, DIVERSITY_PAIRS, seed).classify()?);
    }
    Ok(())
}

pub fn run(cfg: &RunConfig, args: &EvaluateArgs) -> Outcome<()> {
    let spec = SkeletonSpec::default();
    let generated = read_jsonl(&args.generated).at(&args.generated).data()?;
    let references = read_jsonl(&args.references).at(&args.references).data()?;
    if generated.is_empty() {
        return Err(Failure::data(format!("{} holds no sequences", args.generated.display())));
    }
    let refs: HashMap<&str, &SequenceRecord> = references.iter().map(|r| (r.id.as_str(), r)).collect();
    let groups = match &args.groups {
        Some(p) => {
            let g = InstructionGroups::load(p).at(p).data()?;
            g.validate(refs.keys().copied()).data()?;
            Some(g)
        }
        None => None,
    };
    let membership = groups.as_ref().map(InstructionGroups::membership).unwrap_or_default();
    let dir = match &args.mesh_dir {
        Some(d) => d.clone(),
        None => args.references.parent().unwrap_or(Path::new(".")).join(MESH_DIR),
    };
    let mut meshes = Meshes { dir, cache: HashMap::new() };

    let mut rows = Vec::with_capacity(generated.len());
    let mut violations = Vec::new();
    for rec in &generated {
        let m = score(rec, &refs, groups.as_ref(), &membership, &mut meshes, &spec)?;
        if m.ocd > m.cd {
            violations.push(format!("{}: OCD {} exceeds CD {}", m.id, m.ocd, m.cd));
        }
        if [m.fsr, m.ps].iter().any(|v| !(0.0..=1.0).contains(v)) || [m.cd, m.ocd].iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            violations.push(format!("{}: metric out of range", m.id));
        }
        rows.push(m);
    }
    let mut report = MetricReport::from_sequences(rows, violations);
    if let Some(p) = &args.evaluator {
        feature_metrics(&mut report, p, &generated, &references, args.window, cfg.seed)?;
    }

    let table = report.to_table();
    print!("{}", table);
    if let Some(p) = &args.report {
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent).data()?;
        }
        fs::write(p, serde_json::to_string_pretty(&report).map_err(|e| Failure::data(e.to_string()))? + "\n").data()?;
        fs::write(p.with_extension("txt"), &table).data()?;
    }
    if report.violations.is_empty() {
        Ok(())
    } else {
        Err(Failure::numeric(format!("invariant checks failed:\n  {}", report.violations.join("\n  "))))
    }
}
