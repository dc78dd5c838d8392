use std::collections::BTreeSet;
use std::fmt;

use crate::relalg::{strip_comment, Template};

use super::MappingError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VfdKind {
    Branching,
    Path,
}

/// Virtual functional dependency `template ⇝ P1 .. Pn`; the first property is the optimizing one.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Vfd {
    pub kind: VfdKind,
    pub template: Template,
    pub properties: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OceKind {
    Domain,
    Range,
}

/// Optimizing class expression: every subject (or object) of `property` is a member of `class`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Oce {
    pub kind: OceKind,
    pub property: String,
    pub class: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Constraints {
    pub exact: BTreeSet<String>,
    pub vfds: Vec<Vfd>,
    pub oces: Vec<Oce>,
}

impl Constraints {
    pub fn is_empty(&self) -> bool {
        self.exact.is_empty() && self.vfds.is_empty() && self.oces.is_empty()
    }

    /// Parses lines `exact :P`, `vfd branching <template> : :P1 :P2`, `vfd path ...`, `oce domain :P :C`.
    pub fn parse(text: &str) -> Result<Constraints, MappingError> {
        let mut c = Constraints::default();
        for (i, raw) in text.lines().enumerate() {
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            let err = |m: String| MappingError::Syntax { line: i + 1, message: m };
            let toks: Vec<&str> = line.split_whitespace().collect();
            match toks[0] {
                "exact" => {
                    if toks.len() != 2 {
                        return Err(err("expected `exact <predicate>`".into()));
                    }
                    c.exact.insert(toks[1].to_string());
                }
                "vfd" => {
                    let kind = match toks.get(1) {
                        Some(&"branching") => VfdKind::Branching,
                        Some(&"path") => VfdKind::Path,
                        _ => return Err(err("expected `vfd branching` or `vfd path`".into())),
                    };
                    let rest = line.splitn(3, char::is_whitespace).nth(2).unwrap_or("").trim();
                    let (tpl, props) = rest
                        .rsplit_once(" : ")
                        .ok_or_else(|| err("expected `<template> : <properties>`".into()))?;
                    let template = Template::parse(tpl).map_err(|e| err(e.to_string()))?;
                    let properties: Vec<String> = props.split_whitespace().map(|s| s.to_string()).collect();
                    if properties.is_empty() {
                        return Err(err("a VFD needs at least one property".into()));
                    }
                    if kind == VfdKind::Branching {
                        let set: BTreeSet<&String> = properties.iter().collect();
                        if set.len() != properties.len() {
                            return Err(err("repeated property in branching VFD".into()));
                        }
                    }
                    c.vfds.push(Vfd { kind, template, properties });
                }
                "oce" => {
                    if toks.len() != 4 {
                        return Err(err("expected `oce domain|range <property> <class>`".into()));
                    }
                    let kind = match toks[1] {
                        "domain" => OceKind::Domain,
                        "range" => OceKind::Range,
                        other => return Err(err(format!("unknown OCE kind `{other}`"))),
                    };
                    c.oces.push(Oce { kind, property: toks[2].into(), class: toks[3].into() });
                }
                other => return Err(err(format!("unknown constraint `{other}`"))),
            }
        }
        Ok(c)
    }
}

impl fmt::Display for Vfd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            VfdKind::Branching => "branching",
            VfdKind::Path => "path",
        };
        write!(f, "vfd {kind} {} : {}", self.template, self.properties.join(" "))
    }
}

impl fmt::Display for Oce {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            OceKind::Domain => "domain",
            OceKind::Range => "range",
        };
        write!(f, "oce {kind} {} {}", self.property, self.class)
    }
}

impl fmt::Display for Constraints {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.exact {
            writeln!(f, "exact {e}")?;
        }
        for v in &self.vfds {
            writeln!(f, "{v}")?;
        }
        for o in &self.oces {
            writeln!(f, "{o}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let text = "exact :Wellbore\nvfd branching :Wellbore-{wellbore_s} : :completionDate :isInWell\nvfd path :f-{id} : :P1 :P2\noce domain :completionDate :Wellbore\n";
        let c = Constraints::parse(text).unwrap();
        assert_eq!(c.vfds.len(), 2);
        assert_eq!(c.vfds[0].properties, vec![":completionDate", ":isInWell"]);
        assert_eq!(c.to_string(), text);
        assert_eq!(Constraints::parse(&c.to_string()).unwrap(), c);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = Constraints::parse("exact :A\nvfd sideways :t-{x} : :P").unwrap_err();
        assert!(e.to_string().starts_with("line 2"));
    }
}
