//! Reading and writing the on-disk artifacts: canonical JSON files, cover
//! directories with their `tests/` folder, measure files and test families.
//!
//! Every writer emits the canonical serialization followed by one newline, so
//! equal values give byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};

use num_rational::BigRational;
use num_traits::One;
use serde_json::{Map, Value};

use crate::cover::{CoverParams, CoverResult};
use crate::error::{Error, Result};
use crate::measures::{
    measure_from_entries, parse_measure_entries, CodeLengthTable, ElementaryMeasure,
};
use crate::qmat::codec::{self, field, parse_rational, parse_u64, Canonical, MatrixFile};
use crate::qmat::{DensityMatrix, Projector};
use crate::sigma::{family_universal_test, FamilyUniversalTest, SigmaTest};

pub const COVER_FILE: &str = "cover.json";
pub const TESTS_DIR: &str = "tests";

pub fn write_canonical(path: &Path, v: &Value) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut text = codec::canonical_string(v);
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

pub fn read_matrix(path: &Path) -> Result<MatrixFile> {
    codec::decode_value(&read_json(path)?)
}

pub fn read_density(path: &Path) -> Result<DensityMatrix> {
    read_matrix(path)?.into_density()
}

pub fn read_projector(path: &Path) -> Result<Projector> {
    read_matrix(path)?.into_projector()
}

/// Writes `tests/<hash>.json` for each test and then `cover.json`; returns
/// the path of the latter.
pub fn write_cover(dir: &Path, cover: &CoverResult) -> Result<PathBuf> {
    for t in &cover.tests {
        let path = dir
            .join(TESTS_DIR)
            .join(format!("{}.json", t.content_hash()));
        write_canonical(&path, &t.to_value())?;
    }
    let path = dir.join(COVER_FILE);
    write_canonical(&path, &cover.to_value())?;
    Ok(path)
}

fn rationals(v: &Value, key: &str) -> Result<Vec<BigRational>> {
    field(v, key)?
        .as_array()
        .ok_or_else(|| Error::Format(format!("\"{key}\" must be an array")))?
        .iter()
        .map(parse_rational)
        .collect()
}

pub fn params_from_value(v: &Value) -> Result<CoverParams> {
    let small = |key: &str| -> Result<u32> {
        u32::try_from(parse_u64(field(v, key)?, key)?)
            .map_err(|_| Error::Format(format!("\"{key}\" out of range")))
    };
    CoverParams {
        n: small("n")?,
        m: small("m")?,
        d: parse_u64(field(v, "d")?, "d")?,
        theta: parse_rational(field(v, "theta")?)?,
        round_budget: parse_u64(field(v, "round_budget")?, "round_budget")?,
    }
    .validated()
}

/// Loads a cover file and its referenced tests (paths relative to the cover
/// file), re-validating every test against `sigma`. The residual projectors
/// are not stored, so `residual` comes back as `None`.
pub fn read_cover(path: &Path, sigma: &DensityMatrix) -> Result<CoverResult> {
    let v = read_json(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let sigma_hash = field(&v, "sigma_hash")?
        .as_str()
        .ok_or_else(|| Error::format("\"sigma_hash\" must be a string"))?
        .to_string();
    if sigma_hash != sigma.content_hash() {
        return Err(Error::contract("cover file was computed for a different σ"));
    }
    let tests = field(&v, "test_files")?
        .as_array()
        .ok_or_else(|| Error::format("\"test_files\" must be an array"))?
        .iter()
        .map(|f| {
            let rel = f
                .as_str()
                .ok_or_else(|| Error::format("test file entries must be strings"))?;
            SigmaTest::from_value(&read_json(&base.join(rel))?, sigma)
        })
        .collect::<Result<Vec<_>>>()?;
    let per_round_attempts = field(&v, "per_round_attempts")?
        .as_array()
        .ok_or_else(|| Error::format("\"per_round_attempts\" must be an array"))?
        .iter()
        .map(|a| parse_u64(a, "per_round_attempts"))
        .collect::<Result<Vec<_>>>()?;
    Ok(CoverResult {
        params: params_from_value(field(&v, "params")?)?,
        seed: parse_u64(field(&v, "seed")?, "seed")?,
        sigma_hash,
        tests,
        per_round_covered: rationals(&v, "per_round_covered")?,
        per_round_retained: rationals(&v, "per_round_retained")?,
        per_round_attempts,
        residual: None,
        residual_mass: parse_rational(field(&v, "residual_mass")?)?,
    })
}

fn is_content_hash(id: &str) -> bool {
    id.len() == 64 && id.bytes().all(|b| b.is_ascii_hexdigit())
}

/// Loads a measure file over projectors. Each entry's projector comes from
/// its inline `"object"`, or else from `<dir>/<id>.json` next to the measure
/// file; ids that look like content hashes are checked against the loaded
/// projector.
pub fn read_projector_measure(
    path: &Path,
) -> Result<(ElementaryMeasure<Projector>, CodeLengthTable)> {
    let v = read_json(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let entries = parse_measure_entries(&v)?;
    measure_from_entries(entries, |e| {
        let proj = match &e.object {
            Some(obj) => codec::decode_value(obj)?.into_projector()?,
            None => read_projector(&base.join(format!("{}.json", e.id)))?,
        };
        if is_content_hash(&e.id) && proj.content_hash() != e.id {
            return Err(Error::Format(format!(
                "projector does not hash to id {}",
                e.id
            )));
        }
        Ok(proj)
    })
}

/// Writes `measure.json` plus one `<id>.json` per projector.
pub fn write_projector_measure(
    dir: &Path,
    q: &ElementaryMeasure<Projector>,
    l: &CodeLengthTable,
) -> Result<PathBuf> {
    for a in q.atoms() {
        write_canonical(&dir.join(format!("{}.json", a.id)), &a.item.to_value())?;
    }
    let path = dir.join("measure.json");
    write_canonical(&path, &crate::measures::measure_to_value(q, l))?;
    Ok(path)
}

/// Singleton measure `{P}` keyed by the projector's content hash.
pub fn singleton(p: Projector) -> Result<ElementaryMeasure<Projector>> {
    ElementaryMeasure::new(vec![crate::measures::Atom {
        id: p.content_hash(),
        prob: BigRational::one(),
        item: p,
    }])
}

/// Family file: `{"members":[...]}`, each member an inline test object or a
/// path (relative to the family file) to a test file.
pub fn read_family(path: &Path, sigma: &DensityMatrix) -> Result<FamilyUniversalTest> {
    let v = read_json(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let members = field(&v, "members")?
        .as_array()
        .ok_or_else(|| Error::format("\"members\" must be an array"))?
        .iter()
        .map(|m| match m {
            Value::String(rel) => SigmaTest::from_value(&read_json(&base.join(rel))?, sigma),
            obj => SigmaTest::from_value(obj, sigma),
        })
        .collect::<Result<Vec<_>>>()?;
    family_universal_test(members, sigma)
}

/// Family file with every member inline.
pub fn family_file_value(members: &[SigmaTest]) -> Value {
    let mut map = Map::new();
    map.insert(
        "members".into(),
        Value::Array(members.iter().map(SigmaTest::to_value).collect()),
    );
    Value::Object(map)
}
