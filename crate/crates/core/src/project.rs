//! On-disk project layout: schema, ontology, mappings, constraints, data and queries.

use std::path::{Path, PathBuf};

use crate::mapping::{parse_mappings, ConstrainedSpec, Constraints, ObdaSpec};
use crate::ontology::Ontology;
use crate::relalg::{load_csv_dir, Instance, Schema};

#[derive(Debug, thiserror::Error)]
#[error("{path}: {message}")]
pub struct ProjectError {
    pub path: String,
    pub message: String,
}

fn perr(path: &Path, message: impl ToString) -> ProjectError {
    ProjectError { path: path.display().to_string(), message: message.to_string() }
}

/// File locations of a project; `in_dir` fills in the conventional names.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProjectLayout {
    pub schema: PathBuf,
    pub ontology: PathBuf,
    pub mappings: PathBuf,
    pub constraints: Option<PathBuf>,
    pub data: PathBuf,
    pub queries: PathBuf,
}

impl ProjectLayout {
    pub fn in_dir(dir: &Path) -> ProjectLayout {
        let c = dir.join("constraints.txt");
        ProjectLayout {
            schema: dir.join("schema.txt"),
            ontology: dir.join("ontology.ttl"),
            mappings: dir.join("mappings.txt"),
            constraints: c.exists().then_some(c),
            data: dir.join("data"),
            queries: dir.join("queries"),
        }
    }

    pub fn load_spec(&self) -> Result<ConstrainedSpec, ProjectError> {
        let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| perr(p, e));
        let schema = Schema::parse(&read(&self.schema)?).map_err(|e| perr(&self.schema, e))?;
        let ontology = Ontology::parse(&read(&self.ontology)?).map_err(|e| perr(&self.ontology, e))?;
        let mappings = parse_mappings(&read(&self.mappings)?, &schema).map_err(|e| perr(&self.mappings, e))?;
        let spec = ObdaSpec::new(schema, ontology, mappings).map_err(|e| perr(&self.mappings, e))?;
        let constraints = match &self.constraints {
            Some(p) => Constraints::parse(&read(p)?).map_err(|e| perr(p, e))?,
            None => Constraints::default(),
        };
        Ok(ConstrainedSpec { spec, constraints })
    }

    pub fn load_instance(&self, schema: &Schema) -> Result<Instance, ProjectError> {
        load_csv_dir(schema, &self.data).map_err(|e| perr(&self.data, e))
    }

    /// Query files (`*.rq`) sorted by name, with their text.
    pub fn load_queries(&self) -> Result<Vec<(String, String)>, ProjectError> {
        let mut out = Vec::new();
        let entries = std::fs::read_dir(&self.queries).map_err(|e| perr(&self.queries, e))?;
        for e in entries.flatten() {
            let p = e.path();
            if p.extension().and_then(|x| x.to_str()) == Some("rq") {
                let name = p.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
                out.push((name, std::fs::read_to_string(&p).map_err(|e| perr(&p, e))?));
            }
        }
        out.sort();
        Ok(out)
    }
}
