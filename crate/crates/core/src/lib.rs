//! Compiles SPARQL queries over a virtual RDF graph, defined by an ontology and
//! mappings over a relational source, into relational algebra and SQL.

pub mod relalg;
pub mod mapping;
pub mod ontology;
pub mod sparql;
pub mod translator;
pub mod project;
pub mod miner;
pub mod bench;
