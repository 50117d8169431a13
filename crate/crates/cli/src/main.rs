mod config;
mod error;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use scenetok::assembly::{decode_object, load_objects, SceneManifest};
use scenetok::codec::{canonicalize, decode, encode, CanonicalMesh, MeshVocabulary, Scheme};
use scenetok::geometry::{
    back_project, compute_unit_cube_frame, gather_features, NormalizationFrame,
};
use scenetok::io::raster::{load_depth, load_fmap, load_intrinsics, load_mask};
use scenetok::io::tokens::{load_tokens, save_tokens, write_tokens_jsonl, TokenFile};
use scenetok::io::{list_meshes, ply::write_ply_points, read_mesh, write_mesh, LabeledMesh};
use scenetok::mesh::TriangleMesh;
use scenetok::metrics::{evaluate_scene, mesh_stats};
use scenetok::pose::{box_from_affine, encode_pose, pose_transform, GravityBox, PoseStyle};
use scenetok::preprocess::{evaluate_candidates, select_best, Provenance};
use scenetok::sequence::{assemble, parse, ObjectRecord, UnifiedVocabulary};
use serde::Serialize;

use config::RunConfig;
use error::CliError;

#[derive(Parser)]
#[command(
    name = "scenetok",
    version,
    about = "Mesh and pose tokenization, preprocessing and scene evaluation"
)]
struct Cli {
    /// TOML or JSON run configuration; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for batch commands (0 = one per core).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Coord,
    Compact,
    Block,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Scheme {
        match s {
            SchemeArg::Coord => Scheme::Coordinate,
            SchemeArg::Compact => Scheme::Compact,
            SchemeArg::Block => Scheme::BlockPatch,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum StyleArg {
    Axis,
    Block,
}

#[derive(Subcommand)]
enum Command {
    /// Encode a mesh into a token file.
    Tokenize {
        mesh: PathBuf,
        #[arg(long, value_enum)]
        scheme: Option<SchemeArg>,
        #[arg(long)]
        res: Option<u32>,
        #[arg(short, long)]
        output: PathBuf,
        /// Also write a JSON-lines dump of the tokens.
        #[arg(long)]
        jsonl: Option<PathBuf>,
        /// Quantize the coordinates as given instead of fitting the unit cube first.
        #[arg(long)]
        no_normalize: bool,
        /// Box JSON `{center, scale, yaw}`; writes a unified object stream with this pose.
        #[arg(long)]
        pose: Option<PathBuf>,
    },
    /// Decode a token file into a mesh; unified object streams come out posed.
    Detokenize {
        tokens: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Encode a gravity-aligned box given as JSON `{center, scale, yaw}`.
    EncodePose {
        box_json: PathBuf,
        #[arg(long, value_enum, default_value = "axis")]
        style: StyleArg,
        #[arg(long)]
        res: Option<u32>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Recover the transform and box from pose tokens.
    DecodePose { tokens: PathBuf },
    /// Lift a depth map to a point cloud.
    Backproject {
        depth: PathBuf,
        intrinsics: PathBuf,
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Merge, decimate and select one mesh per asset, with provenance sidecars.
    Preprocess { in_dir: PathBuf, out_dir: PathBuf },
    /// Score a predicted scene against ground truth.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Write the JSON report here.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Print the JSON report instead of the table.
        #[arg(long)]
        json: bool,
    },
    /// Encode and decode every mesh in a directory and check the result.
    Roundtrip {
        mesh_dir: PathBuf,
        /// All schemes when absent.
        #[arg(long, value_enum)]
        scheme: Option<SchemeArg>,
        #[arg(long)]
        res: Option<u32>,
    },
    /// Face and vertex counts per mesh after quantization.
    Stats {
        mesh_dir: PathBuf,
        #[arg(long)]
        res: Option<u32>,
        #[arg(long)]
        json: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.kind.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(j) = cli.jobs {
        cfg.jobs = j;
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build_global()
        .map_err(|e| CliError::internal(e.to_string()))?;
    let out = &mut std::io::stdout().lock();
    match cli.command {
        Command::Tokenize {
            mesh,
            scheme,
            res,
            output,
            jsonl,
            no_normalize,
            pose,
        } => {
            override_codec(&mut cfg, scheme, res)?;
            let args = TokenizeArgs {
                mesh: &mesh,
                output: &output,
                jsonl: jsonl.as_deref(),
                normalize: !no_normalize,
                pose: pose.as_deref(),
            };
            tokenize(&cfg, args, out)
        }
        Command::Detokenize { tokens, output } => detokenize(&tokens, &output, out),
        Command::EncodePose {
            box_json,
            style,
            res,
            output,
        } => {
            override_codec(&mut cfg, None, res)?;
            let scheme = match style {
                StyleArg::Axis => Scheme::Coordinate,
                StyleArg::Block => Scheme::BlockPatch,
            };
            encode_pose_cmd(
                MeshVocabulary::new(scheme, cfg.grid()),
                &box_json,
                output.as_deref(),
                out,
            )
        }
        Command::DecodePose { tokens } => decode_pose_cmd(&tokens, out),
        Command::Backproject {
            depth,
            intrinsics,
            mask,
            features,
            output,
        } => backproject(
            &depth,
            &intrinsics,
            mask.as_deref(),
            features.as_deref(),
            &output,
            out,
        ),
        Command::Preprocess { in_dir, out_dir } => preprocess(&cfg, &in_dir, &out_dir, out),
        Command::Eval {
            pred,
            gt,
            seed,
            output,
            json,
        } => {
            if let Some(s) = seed {
                cfg.metrics.seed = s;
            }
            eval(&cfg, &pred, &gt, output.as_deref(), json, out)
        }
        Command::Roundtrip {
            mesh_dir,
            scheme,
            res,
        } => {
            override_codec(&mut cfg, None, res)?;
            let schemes = scheme.map_or(Scheme::ALL.to_vec(), |s| vec![s.into()]);
            roundtrip(&cfg, &mesh_dir, &schemes, out)
        }
        Command::Stats {
            mesh_dir,
            res,
            json,
        } => {
            override_codec(&mut cfg, None, res)?;
            stats(&cfg, &mesh_dir, json, out)
        }
    }
}

fn override_codec(
    cfg: &mut RunConfig,
    scheme: Option<SchemeArg>,
    res: Option<u32>,
) -> Result<(), CliError> {
    if let Some(s) = scheme {
        cfg.scheme = s.into();
    }
    if let Some(r) = res {
        cfg.resolution = r;
    }
    cfg.validate()
}

fn load(path: &Path) -> Result<TriangleMesh, CliError> {
    Ok(read_mesh(path)
        .map_err(|e| CliError::from(e).context(path.display()))?
        .mesh)
}

fn unit_cube(mesh: &TriangleMesh) -> Result<TriangleMesh, CliError> {
    Ok(compute_unit_cube_frame(&mesh.vertices)?.apply_mesh(mesh))
}

fn file_name(p: &Path) -> String {
    p.file_name().map_or_else(
        || p.display().to_string(),
        |n| n.to_string_lossy().into_owned(),
    )
}

fn print_json<T: Serialize>(out: &mut impl Write, value: &T) -> Result<(), CliError> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

fn read_box(path: &Path) -> Result<GravityBox, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::from(e).context(path.display()))?;
    let b: GravityBox = serde_json::from_str(&text)?;
    Ok(GravityBox::new(b.center, b.scale, b.yaw)?)
}

struct TokenizeArgs<'a> {
    mesh: &'a Path,
    output: &'a Path,
    jsonl: Option<&'a Path>,
    normalize: bool,
    pose: Option<&'a Path>,
}

fn tokenize(cfg: &RunConfig, args: TokenizeArgs<'_>, out: &mut impl Write) -> Result<(), CliError> {
    let mut m = load(args.mesh)?;
    if args.normalize {
        m = unit_cube(&m)?;
    }
    let canon = canonicalize(&m, cfg.grid())?;
    let vocab = MeshVocabulary::new(cfg.scheme, cfg.grid());
    let coord = encode(&canon, MeshVocabulary::new(Scheme::Coordinate, cfg.grid())).len();
    let file = match args.pose {
        Some(p) => {
            let unified = UnifiedVocabulary::new(vocab)?;
            let record = ObjectRecord::encode(&read_box(p)?, &canon, unified);
            TokenFile::unified(unified, assemble(&record, unified)?)
        }
        None => TokenFile::mesh(vocab, encode(&canon, vocab).tokens),
    };
    let (output, jsonl) = (args.output, args.jsonl);
    save_tokens(output, &file)?;
    if let Some(p) = jsonl {
        let mut w = std::io::BufWriter::new(std::fs::File::create(p)?);
        write_tokens_jsonl(&mut w, &file)?;
        w.flush()?;
    }
    writeln!(
        out,
        "{} tokens, {} faces, ratio {:.4} vs coord ({} tokens)",
        file.tokens.len(),
        canon.faces.len(),
        file.tokens.len() as f64 / coord as f64,
        coord
    )?;
    Ok(())
}

fn detokenize(tokens: &Path, output: &Path, out: &mut impl Write) -> Result<(), CliError> {
    let f = load_tokens(tokens).map_err(|e| CliError::from(e).context(tokens.display()))?;
    let mesh = if f.unified {
        decode_object(&f.tokens, UnifiedVocabulary::new(f.vocab)?)?.mesh
    } else {
        decode(&f.tokens, f.vocab)?.to_mesh()
    };
    write_mesh(output, &LabeledMesh::plain(mesh.clone()))?;
    writeln!(
        out,
        "{} faces, {} vertices",
        mesh.faces.len(),
        mesh.vertices.len()
    )?;
    Ok(())
}

fn encode_pose_cmd(
    vocab: MeshVocabulary,
    box_json: &Path,
    output: Option<&Path>,
    out: &mut impl Write,
) -> Result<(), CliError> {
    let seq = encode_pose(&read_box(box_json)?, vocab);
    if let Some(p) = output {
        save_tokens(p, &TokenFile::mesh(vocab, seq.tokens.clone()))?;
    }
    writeln!(out, "{}", serde_json::to_string(&seq.tokens)?)?;
    Ok(())
}

#[derive(Serialize)]
struct PoseReport {
    transform: scenetok::pose::AffineTransform,
    residual: f64,
    #[serde(rename = "box")]
    gravity_box: Option<GravityBox>,
}

fn decode_pose_cmd(tokens: &Path, out: &mut impl Write) -> Result<(), CliError> {
    let f = load_tokens(tokens).map_err(|e| CliError::from(e).context(tokens.display()))?;
    let pose = if f.unified {
        parse(&f.tokens, UnifiedVocabulary::new(f.vocab)?)?.pose_tokens
    } else {
        let n = PoseStyle::for_scheme(f.vocab.scheme).token_count();
        f.tokens.get(..n).unwrap_or(&f.tokens).to_vec()
    };
    let fit = pose_transform(&pose, f.vocab)?;
    let report = PoseReport {
        transform: fit.transform,
        residual: fit.residual,
        gravity_box: box_from_affine(&fit.transform).ok(),
    };
    print_json(out, &report)
}

fn backproject(
    depth: &Path,
    intrinsics: &Path,
    mask: Option<&Path>,
    features: Option<&Path>,
    output: &Path,
    out: &mut impl Write,
) -> Result<(), CliError> {
    let ctx = |p: &Path| {
        let p = p.display().to_string();
        move |e: scenetok::io::IoError| CliError::from(e).context(p)
    };
    let d = load_depth(depth).map_err(ctx(depth))?;
    let k = load_intrinsics(intrinsics).map_err(ctx(intrinsics))?;
    let m = mask.map(|p| load_mask(p).map_err(ctx(p))).transpose()?;
    let mut cloud = back_project(&d, &k, m.as_ref())?;
    if let Some(p) = features {
        let fm = load_fmap(p).map_err(ctx(p))?;
        let pixels = cloud.pixels.as_deref().unwrap_or_default();
        cloud.features = Some(gather_features(&fm, pixels, d.dims()));
    }
    let mut w = std::io::BufWriter::new(std::fs::File::create(output)?);
    write_ply_points(&mut w, &cloud)?;
    w.flush()?;
    writeln!(out, "{} points", cloud.len())?;
    Ok(())
}

#[derive(Serialize)]
struct CandidateLine {
    quant_level: u32,
    face_target: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    faces: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    hausdorff: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Serialize)]
struct Sidecar {
    source: String,
    /// Maps the source coordinates to the unit cube the output lives in.
    frame: NormalizationFrame,
    selected: Provenance,
    candidates: Vec<CandidateLine>,
}

fn preprocess_one(cfg: &RunConfig, path: &Path, out_dir: &Path) -> Result<Provenance, CliError> {
    let mesh = load(path)?;
    let frame = compute_unit_cube_frame(&mesh.vertices)?;
    let results = evaluate_candidates(&mesh, &cfg.preprocess)?;
    let mut lines = Vec::new();
    let mut ok = Vec::new();
    let pairs = cfg
        .preprocess
        .quant_levels
        .iter()
        .flat_map(|&q| cfg.preprocess.face_targets.iter().map(move |&t| (q, t)));
    for ((quant_level, face_target), r) in pairs.zip(results) {
        lines.push(match &r {
            Ok(c) => CandidateLine {
                quant_level,
                face_target,
                faces: Some(c.faces),
                hausdorff: Some(c.hausdorff),
                error: None,
            },
            Err(e) => CandidateLine {
                quant_level,
                face_target,
                faces: None,
                hausdorff: None,
                error: Some(e.to_string()),
            },
        });
        if let Ok(c) = r {
            ok.push(c);
        }
    }
    let best = select_best(&ok, cfg.preprocess.hausdorff_tau)
        .ok_or_else(|| CliError::validation("every candidate failed"))?;
    let stem = path
        .file_stem()
        .map_or_else(|| "mesh".into(), |s| s.to_string_lossy().into_owned());
    write_mesh(
        &out_dir.join(format!("{stem}.obj")),
        &LabeledMesh::plain(best.mesh.clone()),
    )?;
    let sidecar = Sidecar {
        source: file_name(path),
        frame,
        selected: best.provenance(),
        candidates: lines,
    };
    std::fs::write(
        out_dir.join(format!("{stem}.json")),
        serde_json::to_string_pretty(&sidecar)? + "\n",
    )?;
    Ok(best.provenance())
}

fn preprocess(
    cfg: &RunConfig,
    in_dir: &Path,
    out_dir: &Path,
    out: &mut impl Write,
) -> Result<(), CliError> {
    let files = list_meshes(in_dir).map_err(|e| CliError::from(e).context(in_dir.display()))?;
    std::fs::create_dir_all(out_dir)?;
    let results: Vec<_> = files
        .par_iter()
        .map(|p| preprocess_one(cfg, p, out_dir).map_err(|e| e.context(p.display())))
        .collect();
    let mut first_err = None;
    for (p, r) in files.iter().zip(results) {
        match r {
            Ok(prov) => writeln!(
                out,
                "{:<24} q={:<5} target={:<5} faces={:<5} hausdorff={:.5}",
                file_name(p),
                prov.quant_level,
                prov.face_target,
                prov.faces,
                prov.hausdorff
            )?,
            Err(e) => {
                eprintln!("{}", e.to_json());
                first_err.get_or_insert(e);
            }
        }
    }
    first_err.map_or(Ok(()), Err)
}

fn eval(
    cfg: &RunConfig,
    pred: &Path,
    gt: &Path,
    output: Option<&Path>,
    json: bool,
    out: &mut impl Write,
) -> Result<(), CliError> {
    let base = |p: &Path| p.parent().map(Path::to_path_buf).unwrap_or_default();
    let pm = SceneManifest::load(pred)?;
    let gm = SceneManifest::load(gt)?;
    let p = load_objects(&pm, &base(pred))?;
    let g = load_objects(&gm, &base(gt))?;
    let report = evaluate_scene(&p, &g, &cfg.metrics)?;
    if let Some(o) = output {
        std::fs::write(o, serde_json::to_string_pretty(&report)? + "\n")?;
    }
    if json {
        print_json(out, &report)
    } else {
        write!(out, "{}", report.to_table())?;
        Ok(())
    }
}

fn roundtrip_one(
    mesh: &TriangleMesh,
    vocab: MeshVocabulary,
) -> Result<(CanonicalMesh, usize), CliError> {
    let canon = canonicalize(mesh, vocab.grid)?;
    let tokens = encode(&canon, vocab).tokens;
    let back = decode(&tokens, vocab)?;
    if back != canon {
        return Err(CliError::internal(format!(
            "{} decode differs from the canonical mesh",
            vocab.scheme
        )));
    }
    Ok((canon, tokens.len()))
}

fn roundtrip(
    cfg: &RunConfig,
    dir: &Path,
    schemes: &[Scheme],
    out: &mut impl Write,
) -> Result<(), CliError> {
    let files = list_meshes(dir).map_err(|e| CliError::from(e).context(dir.display()))?;
    if files.is_empty() {
        return Err(CliError::validation(format!(
            "no .obj or .ply files in {}",
            dir.display()
        )));
    }
    let jobs: Vec<(usize, Scheme)> = (0..files.len())
        .flat_map(|i| schemes.iter().map(move |&s| (i, s)))
        .collect();
    let results: Vec<_> = jobs
        .par_iter()
        .map(|&(i, s)| {
            let mesh = unit_cube(&load(&files[i])?)?;
            roundtrip_one(&mesh, MeshVocabulary::new(s, cfg.grid()))
        })
        .collect();
    let mut failures = 0;
    for (&(i, s), r) in jobs.iter().zip(results) {
        match r {
            Ok((c, n)) => writeln!(
                out,
                "ok   {:<24} {:<8} faces={:<6} tokens={}",
                file_name(&files[i]),
                s,
                c.faces.len(),
                n
            )?,
            Err(e) => {
                failures += 1;
                writeln!(out, "FAIL {:<24} {:<8} {}", file_name(&files[i]), s, e)?;
            }
        }
    }
    if failures > 0 {
        return Err(CliError::internal(format!(
            "{failures} of {} roundtrips failed",
            jobs.len()
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct StatsRow {
    name: String,
    faces: usize,
    vertices: usize,
}

fn stats(cfg: &RunConfig, dir: &Path, json: bool, out: &mut impl Write) -> Result<(), CliError> {
    let files = list_meshes(dir).map_err(|e| CliError::from(e).context(dir.display()))?;
    let meshes = files
        .par_iter()
        .map(|p| load(p))
        .collect::<Result<Vec<_>, _>>()?;
    let s = mesh_stats(&meshes, cfg.grid())?;
    let rows: Vec<StatsRow> = files
        .iter()
        .zip(&s.meshes)
        .map(|(p, c)| StatsRow {
            name: file_name(p),
            faces: c.faces,
            vertices: c.vertices,
        })
        .collect();
    if json {
        return print_json(out, &rows);
    }
    writeln!(out, "{:<24} {:>8} {:>8}", "mesh", "|F|", "|V|")?;
    for r in &rows {
        writeln!(out, "{:<24} {:>8} {:>8}", r.name, r.faces, r.vertices)?;
    }
    let n = rows.len().max(1) as f64;
    writeln!(
        out,
        "{:<24} {:>8.1} {:>8.1}",
        "mean",
        s.faces as f64 / n,
        s.vertices as f64 / n
    )?;
    writeln!(
        out,
        "{:<24} {:>8} {:>8}",
        "max",
        rows.iter().map(|r| r.faces).max().unwrap_or(0),
        rows.iter().map(|r| r.vertices).max().unwrap_or(0)
    )?;
    Ok(())
}
