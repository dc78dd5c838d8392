use std::path::PathBuf;

use obda_core::mapping::{parse_mappings, ConstrainedSpec, Constraints, ObdaSpec};
use obda_core::miner::vfd::{lemma_identity, Bodies};
use obda_core::miner::{mine, validate_constraints, MinerOptions};
use obda_core::ontology::Ontology;
use obda_core::project::ProjectLayout;
use obda_core::relalg::{read_relation_csv, Instance, Schema};
use obda_core::translator::Prepared;

fn wellbore() -> (ConstrainedSpec, Instance) {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../projects/wellbore");
    let layout = ProjectLayout::in_dir(&dir);
    let cspec = layout.load_spec().unwrap();
    let inst = layout.load_instance(&cspec.spec.schema).unwrap();
    (cspec, inst)
}

fn with_mappings(cspec: &ConstrainedSpec, text: &str) -> ObdaSpec {
    let schema = cspec.spec.schema.clone();
    let maps = parse_mappings(text, &schema).unwrap();
    ObdaSpec::new(schema, cspec.spec.ontology.clone(), maps).unwrap()
}

#[test]
fn declared_constraints_are_certified() {
    let (cspec, inst) = wellbore();
    let report = validate_constraints(&cspec, &inst).unwrap();
    assert!(report.rejected.is_empty(), "{report}");
    assert_eq!(report.certified.exact.len(), 1);
    assert_eq!(report.certified.vfds.len(), 1);
    assert_eq!(report.certified.oces.len(), 2);
}

#[test]
fn mining_rediscovers_the_star_vfd() {
    let (cspec, inst) = wellbore();
    let report = mine(&cspec.spec, &inst, &MinerOptions::default()).unwrap();
    let text = report.certified.to_string();
    assert!(text.contains("vfd branching :Wellbore-{wellbore_s} : :completionDate :isInWell"), "{report}");
    assert!(text.contains("exact :Wellbore"), "{report}");
    assert!(text.contains("oce domain :completionDate :Wellbore"), "{report}");
    assert!(report.certified.vfds.iter().all(|v| !v.properties.contains(&":hasInterval".to_string())), "{report}");
    let reparsed = Constraints::parse(&report.constraint_file()).unwrap();
    assert_eq!(reparsed, report.certified);
    let again = mine(&cspec.spec, &inst, &MinerOptions::default()).unwrap();
    assert_eq!(again, report);
}

#[test]
fn historic_rows_break_the_dependency() {
    let (cspec, inst) = wellbore();
    let src = std::fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../projects/wellbore/mappings.txt")).unwrap();
    let unfiltered = src.replace(
        "SELECT wellbore_s, well_s, year, month, day FROM wellbore WHERE r_existence_kd_nm = 'actual'",
        "SELECT wellbore_s, well_s, year, month, day FROM wellbore",
    );
    assert_ne!(src, unfiltered);
    let spec = with_mappings(&cspec, &unfiltered);
    let broken = ConstrainedSpec { spec, constraints: cspec.constraints.clone() };
    let report = validate_constraints(&broken, &inst).unwrap();
    let r = report.rejected.iter().find(|r| r.constraint.starts_with("vfd branching")).expect("vfd rejected");
    assert!(r.witness.as_deref().unwrap_or("").contains("\"001\""), "{report}");
    assert!(report.certified.vfds.is_empty());
}

#[test]
fn optimizing_property_mapped_twice_is_not_used() {
    let (cspec, inst) = wellbore();
    let src = std::fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../projects/wellbore/mappings.txt")).unwrap();
    let twice = format!(
        "{src}map cd2: :Wellbore-{{wellbore_s}} :completionDate \"{{year}}-{{month}}-{{day}}\"^^xsd:date\n  <- SELECT wellbore_s, year, month, day FROM wellbore WHERE r_existence_kd_nm = 'historic'\n"
    );
    let spec = with_mappings(&cspec, &twice);
    let report = validate_constraints(&ConstrainedSpec { spec, constraints: cspec.constraints.clone() }, &inst).unwrap();
    assert!(report.certified.vfds.is_empty(), "{report}");
}

fn path_fixture(extra_dept: bool) -> (ObdaSpec, Instance) {
    let schema = Schema::parse(
        "relation emp(id text, dept text, boss text)\nrelation dept(did text, boss text)\nkey emp(id)\nkey dept(did)\n",
    )
    .unwrap();
    let ontology = Ontology::parse(":Employee a owl:Class .\n").unwrap();
    let maps = parse_mappings(
        "map w: :E-{id} :worksIn :D-{dept}\n  <- SELECT id, dept, boss FROM emp\nmap b: :D-{did} :managedBy :M-{boss}\n  <- SELECT did, boss FROM dept\n",
        &schema,
    )
    .unwrap();
    let mut inst = Instance::default();
    inst.relations.insert("emp".into(), read_relation_csv(&schema, "emp", "id,dept,boss\ne1,d1,m1\ne2,d1,m1\ne3,d2,m2\n").unwrap());
    let dept = if extra_dept { "did,boss\nd1,m1\nd2,m9\n" } else { "did,boss\nd1,m1\nd2,m2\nd3,m3\n" };
    inst.relations.insert("dept".into(), read_relation_csv(&schema, "dept", dept).unwrap());
    (ObdaSpec::new(schema, ontology, maps).unwrap(), inst)
}

#[test]
fn path_vfd_is_mined_and_satisfies_the_lemma() {
    let (spec, inst) = path_fixture(false);
    let report = mine(&spec, &inst, &MinerOptions::default()).unwrap();
    let v = report.certified.vfds.iter().find(|v| v.to_string() == "vfd path :E-{id} : :worksIn :managedBy").cloned();
    let v = v.unwrap_or_else(|| panic!("{report}"));
    let prep = Prepared::new(&ConstrainedSpec { spec: spec.clone(), constraints: Constraints::default() }, false).unwrap();
    let mut bodies = Bodies::new(&prep.split, &inst);
    assert!(lemma_identity(&v, &spec.schema, &mut bodies).unwrap());
}

#[test]
fn path_vfd_with_conflicting_source_is_rejected() {
    let (spec, inst) = path_fixture(true);
    let report = mine(&spec, &inst, &MinerOptions::default()).unwrap();
    assert!(report.certified.vfds.iter().all(|v| v.kind != obda_core::mapping::VfdKind::Path), "{report}");
    let r = report.rejected.iter().find(|r| r.constraint.starts_with("vfd path :E-{id}")).expect("rejection");
    assert!(r.witness.is_some(), "{report}");
}
