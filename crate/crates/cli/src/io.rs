//! Artifact reading and writing with path context on every failure.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use nalgebra::DMatrix;
use shapemanifold::artifact::{decode_pod, decode_vectors, encode_pod, encode_vectors};
use shapemanifold::manifold::ReducedSpace;
use shapemanifold::mesh::{write_stl, StlFormat, TriMesh};
use shapemanifold::pod::PodBasis;
use shapemanifold::rom::{RomDoc, RomModel, SolutionDatabase};

pub const GEOMETRY_POD: &str = "geometry_pod.bin";
pub const REDUCED_SPACE: &str = "reduced_space.json";
pub const FIELDS: &str = "fields.bin";
pub const INDEX: &str = "index.csv";
pub const ROM_BASIS: &str = "basis.bin";
pub const ROM_DOC: &str = "rom.json";

pub fn write(path: &Path, bytes: impl AsRef<[u8]>) -> anyhow::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating directory {}", dir.display()))?;
    }
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

pub fn read(path: &Path) -> anyhow::Result<Vec<u8>> {
    std::fs::read(path).with_context(|| format!("reading {}", path.display()))
}

pub fn read_string(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub fn write_json(path: &Path, value: &impl serde::Serialize) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write(path, text)
}

pub fn write_mesh(path: &Path, mesh: &TriMesh, format: StlFormat) -> anyhow::Result<()> {
    write(path, write_stl(mesh, format))
}

/// CSV with one header row and numeric records.
pub fn write_csv(
    path: &Path,
    header: &[String],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    write(path, w.into_inner().context("flushing csv")?)
}

pub fn numbered(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (0..n).map(move |i| format!("{prefix}_{i}"))
}

pub fn matrix_csv(path: &Path, prefix: &str, m: &DMatrix<f64>) -> anyhow::Result<()> {
    let header: Vec<String> = std::iter::once("sample_id".to_string())
        .chain(numbered(prefix, m.ncols()))
        .collect();
    let rows = m.row_iter().enumerate().map(|(i, r)| {
        std::iter::once(i.to_string())
            .chain(r.iter().map(f64::to_string))
            .collect()
    });
    write_csv(path, &header, rows)
}

pub fn save_pod(path: &Path, basis: &PodBasis) -> anyhow::Result<()> {
    write(path, encode_pod(basis))
}

pub fn load_pod(path: &Path) -> anyhow::Result<PodBasis> {
    decode_pod(&read(path)?).with_context(|| format!("decoding {}", path.display()))
}

pub fn save_space(dir: &Path, space: &ReducedSpace) -> anyhow::Result<()> {
    save_pod(&dir.join(GEOMETRY_POD), space.basis())?;
    write(&dir.join(REDUCED_SPACE), space.to_json()? + "\n")
}

pub fn load_space(dir: &Path) -> anyhow::Result<ReducedSpace> {
    let basis = load_pod(&dir.join(GEOMETRY_POD))?;
    let path = dir.join(REDUCED_SPACE);
    ReducedSpace::from_json(&read_string(&path)?, basis)
        .with_context(|| format!("decoding {}", path.display()))
}

/// `fields.bin` plus `index.csv` with `sample_id,mu_0..,objective`.
pub fn save_database(dir: &Path, db: &SolutionDatabase) -> anyhow::Result<()> {
    write(&dir.join(FIELDS), encode_vectors(db.fields())?)?;
    let header: Vec<String> = std::iter::once("sample_id".to_string())
        .chain(numbered("mu", db.param_dim()))
        .chain(std::iter::once("objective".to_string()))
        .collect();
    let rows = (0..db.len()).map(|i| {
        std::iter::once(i.to_string())
            .chain(db.params().row(i).iter().map(f64::to_string))
            .chain(std::iter::once(db.objectives()[i].to_string()))
            .collect()
    });
    write_csv(&dir.join(INDEX), &header, rows)
}

pub fn load_database(dir: &Path) -> anyhow::Result<SolutionDatabase> {
    let index = dir.join(INDEX);
    let bytes = read(&index)?;
    let mut reader = csv::Reader::from_reader(bytes.as_slice());
    let width = reader
        .headers()
        .with_context(|| format!("reading {}", index.display()))?
        .len();
    if width < 2 {
        bail!(
            "{}: expected columns sample_id,mu..,objective",
            index.display()
        );
    }
    let d = width - 2;
    let mut params = Vec::new();
    let mut objectives = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.with_context(|| format!("reading {}", index.display()))?;
        let values = record
            .iter()
            .skip(1)
            .map(str::parse::<f64>)
            .collect::<Result<Vec<_>, _>>()
            .with_context(|| format!("{}: bad number on record {}", index.display(), line + 1))?;
        params.extend_from_slice(&values[..d]);
        objectives.push(values[d]);
    }
    let fields_path = dir.join(FIELDS);
    let fields = decode_vectors(&read(&fields_path)?)
        .with_context(|| format!("decoding {}", fields_path.display()))?;
    let params = DMatrix::from_row_slice(objectives.len(), d, &params);
    SolutionDatabase::new(params, fields, objectives)
        .with_context(|| format!("loading database {}", dir.display()))
}

pub fn save_rom(dir: &Path, model: &RomModel) -> anyhow::Result<()> {
    save_pod(&dir.join(ROM_BASIS), model.basis())?;
    write_json(&dir.join(ROM_DOC), &model.doc())
}

pub fn load_rom(dir: &Path) -> anyhow::Result<RomModel> {
    let basis = load_pod(&dir.join(ROM_BASIS))?;
    let path = dir.join(ROM_DOC);
    let doc: RomDoc = serde_json::from_str(&read_string(&path)?)
        .with_context(|| format!("parsing {}", path.display()))?;
    RomModel::from_parts(basis, doc).with_context(|| format!("loading model {}", dir.display()))
}

/// `dir/name`, resolved against `out` unless already given.
pub fn resolve(out: &Path, given: Option<&Path>, default: &str) -> PathBuf {
    given.map_or_else(|| out.join(default), Path::to_path_buf)
}
