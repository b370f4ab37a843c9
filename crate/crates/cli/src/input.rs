use std::path::Path;

use thermoform::catalog;
use thermoform::io::parse_system;
use thermoform::{MatrixSystem, Subspace};

use crate::CliError;

pub struct Loaded {
    pub system: MatrixSystem,
    /// `(factor index, subspace)`, 1-based factor indices.
    pub seeds: Vec<(usize, Subspace)>,
    pub notes: Vec<String>,
}

/// Reads a system file when `input` names an existing path, otherwise builds
/// the catalog entry it describes. `seed` overrides a catalog `seed` parameter.
pub fn load(input: &str, seed: Option<u64>) -> Result<Loaded, CliError> {
    let path = Path::new(input);
    if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: input.to_string(),
            source,
        })?;
        let file = parse_system(&text)?;
        return Ok(Loaded {
            system: file.system,
            seeds: file.seed_subspaces,
            notes: file.notes,
        });
    }
    let (name, mut params) = catalog::parse_spec(input)?;
    if !catalog::KEYS.contains(&name.as_str()) {
        return Err(CliError::Usage(format!(
            "{input:?} is neither a readable file nor a catalog entry ({})",
            catalog::KEYS.join(", ")
        )));
    }
    if let Some(s) = seed {
        params.seed = s;
    }
    let entry = catalog::build(&name, &params)?;
    Ok(Loaded {
        system: entry.system,
        seeds: Vec::new(),
        notes: Vec::new(),
    })
}

pub fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>, CliError> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<T>()
                .map_err(|_| CliError::Usage(format!("cannot parse {what} entry {s:?}")))
        })
        .collect()
}
