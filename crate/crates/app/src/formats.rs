//! File formats: network JSON, CSV roster import, partitions and results.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use cohort_core::model::NetworkViolation;
use cohort_core::{validate_network, Node, Partition, SocialNetwork, SolveResult, Tie};
use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {source}")]
    Toml {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
    #[error("invalid network: {}", list(.0))]
    InvalidNetwork(Vec<NetworkViolation>),
}

fn list(v: &[NetworkViolation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FormatError + '_ {
    move |source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, FormatError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| FormatError::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), FormatError> {
    fs::write(path, to_json(value)).map_err(io_err(path))
}

pub fn read_toml<T: DeserializeOwned>(path: &Path) -> Result<T, FormatError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    toml::from_str(&text).map_err(|source| FormatError::Toml {
        path: path.to_path_buf(),
        source,
    })
}

fn checked(net: SocialNetwork) -> Result<SocialNetwork, FormatError> {
    let violations = validate_network(&net);
    if violations.is_empty() {
        Ok(net)
    } else {
        Err(FormatError::InvalidNetwork(violations))
    }
}

/// Loads and validates a network JSON document.
pub fn load_network(path: &Path) -> Result<SocialNetwork, FormatError> {
    checked(read_json(path)?)
}

fn read_csv<T: DeserializeOwned, R: Read>(path: &Path, reader: R) -> Result<Vec<T>, FormatError> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader)
        .deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|source| FormatError::Csv {
            path: path.to_path_buf(),
            source,
        })
}

/// Builds a network from a node CSV (`id,behavior`) and a tie CSV
/// (`from,to,strength`), both with header rows.
pub fn import_csv(nodes: &Path, ties: &Path) -> Result<SocialNetwork, FormatError> {
    let node_rows: Vec<Node> = read_csv(nodes, fs::File::open(nodes).map_err(io_err(nodes))?)?;
    let tie_rows: Vec<Tie> = read_csv(ties, fs::File::open(ties).map_err(io_err(ties))?)?;
    checked(SocialNetwork::new(node_rows, tie_rows))
}

/// Reads a partition from either a bare partition document or a solve
/// result file.
pub fn load_partition(path: &Path) -> Result<Partition, FormatError> {
    let value: serde_json::Value = read_json(path)?;
    let inner = value.get("partition").cloned().unwrap_or(value);
    serde_json::from_value(inner).map_err(|source| FormatError::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_result(path: &Path) -> Result<SolveResult, FormatError> {
    read_json(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use cohort_core::instance::ws_instance;
    use cohort_core::{solve_lns, LnsConfig, ModelParams, SolveConstraints};

    #[test]
    fn network_json_shape() {
        let net: SocialNetwork = serde_json::from_str(
            r#"{"nodes":[{"id":"a","behavior":"user"},{"id":"b","behavior":"non_user"}],
                "ties":[{"from":"a","to":"b","strength":"strong"}]}"#,
        )
        .unwrap();
        assert_eq!(net.user_count(), 1);
        let back: SocialNetwork = serde_json::from_str(&to_json(&net)).unwrap();
        assert_eq!(back, net);
    }

    #[test]
    fn csv_import_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let nodes = dir.path().join("nodes.csv");
        let ties = dir.path().join("ties.csv");
        fs::write(&nodes, "id,behavior\na,user\nb,non_user\nc, non_user\n").unwrap();
        fs::write(&ties, "from,to,strength\na,b,weak\nb,c,strong\n").unwrap();
        let net = import_csv(&nodes, &ties).unwrap();
        assert_eq!((net.nodes.len(), net.ties.len()), (3, 2));

        fs::write(&ties, "from,to,strength\na,a,weak\n").unwrap();
        assert!(matches!(import_csv(&nodes, &ties), Err(FormatError::InvalidNetwork(_))));
        fs::write(&ties, "from,to,strength\na,b,medium\n").unwrap();
        assert!(matches!(import_csv(&nodes, &ties), Err(FormatError::Csv { .. })));
    }

    #[test]
    fn result_files_round_trip() {
        let net = ws_instance(16, 2).unwrap();
        let cfg = LnsConfig {
            restarts: 3,
            ..LnsConfig::default()
        };
        let c = SolveConstraints::default().must("v001", "v002").cannot("v003", "v004").pin("v005", 1);
        let r = solve_lns(&net, &ModelParams::default(), &cfg, &c).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.json");
        write_json(&path, &r).unwrap();
        assert_eq!(load_result(&path).unwrap(), r);
        assert_eq!(load_partition(&path).unwrap(), r.partition);
        let cpath = dir.path().join("c.json");
        write_json(&cpath, &c).unwrap();
        assert_eq!(read_json::<SolveConstraints>(&cpath).unwrap(), c);
        let ppath = dir.path().join("p.json");
        write_json(&ppath, &r.partition).unwrap();
        assert_eq!(load_partition(&ppath).unwrap(), r.partition);
    }
}
