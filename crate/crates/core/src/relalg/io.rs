use std::path::Path;

use chrono::NaiveDate;

use super::{ColumnType, Instance, RelError, Relation, Schema, Value};

fn parse_cell(raw: &str, ty: ColumnType, rel: &str, col: &str) -> Result<Value, RelError> {
    if raw.is_empty() {
        return Ok(Value::Null);
    }
    let bad = || RelError::Data(format!("{rel}.{col}: cannot read `{raw}` as {ty}"));
    Ok(match ty {
        ColumnType::Int => Value::Int(raw.trim().parse().map_err(|_| bad())?),
        ColumnType::Text => Value::text(raw),
        ColumnType::Date => Value::Date(NaiveDate::parse_from_str(raw.trim(), "%Y-%m-%d").map_err(|_| bad())?),
    })
}

/// Reads one relation from CSV text whose header names its attributes.
pub fn read_relation_csv(schema: &Schema, rel: &str, text: &str) -> Result<Relation, RelError> {
    let attrs = schema.attrs(rel)?.to_vec();
    let types = &schema.types[rel];
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| RelError::Data(format!("{rel}: {e}")))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut pos = Vec::with_capacity(attrs.len());
    for a in &attrs {
        pos.push(
            header
                .iter()
                .position(|h| h == a)
                .ok_or_else(|| RelError::Data(format!("{rel}.csv: missing column `{a}`")))?,
        );
    }
    for h in &header {
        if !attrs.contains(h) {
            return Err(RelError::UnknownAttribute(format!("{rel}.{h}")));
        }
    }
    let mut out = Relation::new(&attrs);
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| RelError::Data(format!("{rel}.csv record {}: {e}", line + 1)))?;
        let mut t = Vec::with_capacity(attrs.len());
        for (k, &p) in pos.iter().enumerate() {
            let raw = record.get(p).unwrap_or("");
            t.push(parse_cell(raw, types[k], rel, &attrs[k])?);
        }
        out.insert(t);
    }
    Ok(out)
}

/// Loads `<relation>.csv` for every schema relation; a missing file is an empty relation.
pub fn load_csv_dir(schema: &Schema, dir: &Path) -> Result<Instance, RelError> {
    let mut inst = Instance::empty(schema);
    if let Ok(entries) = std::fs::read_dir(dir) {
        for e in entries.flatten() {
            let p = e.path();
            if p.extension().and_then(|x| x.to_str()) == Some("csv") {
                let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
                if !schema.relations.contains_key(stem) {
                    return Err(RelError::UnknownRelation(stem.to_string()));
                }
            }
        }
    } else {
        return Err(RelError::Data(format!("cannot read data directory {}", dir.display())));
    }
    for rel in schema.relations.keys() {
        let path = dir.join(format!("{rel}.csv"));
        if path.exists() {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| RelError::Data(format!("{}: {e}", path.display())))?;
            inst.add_relation(rel, read_relation_csv(schema, rel, &text)?);
        }
    }
    inst.validate(schema)?;
    Ok(inst)
}

/// Writes a relation as CSV with a header row; nulls become empty fields.
pub fn write_relation_csv(rel: &Relation) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(rel.attrs()).expect("in-memory write");
    for t in rel.sorted_rows() {
        let cells: Vec<String> = t.iter().map(|v| v.lexical()).collect();
        w.write_record(&cells).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf8")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_field_is_null_and_header_order_is_free() {
        let s = Schema::parse("relation t(a int, b text, c date)").unwrap();
        let r = read_relation_csv(&s, "t", "c,b,a\n2009-04-01,,3\n,x,4\n").unwrap();
        assert!(r.contains(&[Value::Int(3), Value::Null, Value::Date(NaiveDate::from_ymd_opt(2009, 4, 1).unwrap())]));
        assert!(r.contains(&[Value::Int(4), Value::text("x"), Value::Null]));
    }

    #[test]
    fn unknown_header_is_schema_error() {
        let s = Schema::parse("relation t(a int)").unwrap();
        assert!(matches!(read_relation_csv(&s, "t", "a,z\n1,2\n"), Err(RelError::UnknownAttribute(_))));
    }

    #[test]
    fn roundtrip() {
        let s = Schema::parse("relation t(a int, b text)").unwrap();
        let r = read_relation_csv(&s, "t", "a,b\n1,x\n2,\n").unwrap();
        let again = read_relation_csv(&s, "t", &write_relation_csv(&r)).unwrap();
        assert_eq!(r, again);
    }
}
