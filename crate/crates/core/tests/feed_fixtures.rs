mod common;

use std::fs::File;
use std::io::{BufReader, Write};

use common::fixture;
use flate2::write::GzEncoder;
use flate2::Compression;
use vulnclass::corpus::is_hardware;
use vulnclass::cpe::{AttrValue, Part};
use vulnclass::nvd::{parse_feed_json, parse_feed_xml, read_feed_file, ImpactLevel, SkipReason};

#[test]
fn fig1_xml_record() {
    let (records, stats) = read_feed_file(&fixture("fig1.xml")).unwrap();
    assert_eq!(stats.records_ok, 1);
    assert_eq!(stats.records_skipped, 0);
    let rec = &records[0];
    assert_eq!(rec.cve_id, "CVE-2017-3741");
    assert_eq!(rec.year(), 2017);
    assert_eq!(rec.cvss_score, Some(2.1));
    assert_eq!(rec.cwe_id.as_deref(), Some("CWE-254"));
    assert!(rec
        .summary
        .starts_with("In the Lenovo Power Management driver"));
    let cpes = rec.cpes();
    assert_eq!(cpes.len(), 2);
    assert!(cpes.iter().all(|c| c.part == Part::Application));
    assert_eq!(cpes[0].version, AttrValue::literal("1.67.12.19"));
    assert_eq!(cpes[1].version, AttrValue::literal("1.67.12.23"));
    let impact = rec.impact.as_ref().unwrap();
    assert_eq!(impact.integrity, ImpactLevel::Partial);
    assert_eq!(impact.confidentiality, ImpactLevel::None);
    assert_eq!(
        rec.published.unwrap().to_rfc3339(),
        "2017-06-04T17:29:00.387-04:00"
    );
    assert_eq!(rec.published_quarter(), Some((2017, 2)));
    assert_eq!(rec.references.len(), 1);
    assert_eq!(
        rec.references[0].url,
        "https://support.lenovo.com/us/en/product_security/LEN-14440"
    );
    assert_eq!(rec.software_list.as_ref().unwrap().len(), 1);
}

#[test]
fn xml_and_json_agree() {
    let (xml, _) =
        parse_feed_xml(BufReader::new(File::open(fixture("fig1.xml")).unwrap())).unwrap();
    let (json, _) = parse_feed_json(File::open(fixture("fig1.json")).unwrap()).unwrap();
    assert_eq!(xml, json);
    let (sniffed, _) = read_feed_file(&fixture("fig1.json")).unwrap();
    assert_eq!(sniffed, json);
}

#[test]
fn selection_picks_the_hardware_record() {
    let (records, stats) = read_feed_file(&fixture("two_records.xml")).unwrap();
    assert_eq!(stats.records_ok, 2);
    let hw: Vec<&str> = records
        .iter()
        .filter(|r| is_hardware(r))
        .map(|r| r.cve_id.as_str())
        .collect();
    assert_eq!(hw, ["CVE-2018-0001"]);
}

#[test]
fn fig2_configuration_order() {
    let (records, _) = read_feed_file(&fixture("fig2.xml")).unwrap();
    let uris: Vec<String> = records[0].cpes().iter().map(|c| c.to_uri()).collect();
    assert_eq!(
        uris,
        [
            "cpe:/o:d-link:dgs-1100_firmware:1.01.018",
            "cpe:/h:d-link:dgs-1100-05:-",
            "cpe:/h:d-link:dgs-1100-05pd:-",
            "cpe:/h:d-link:dgs-1100-08:-",
            "cpe:/h:d-link:dgs-1100-08p:-",
            "cpe:/h:d-link:dgs-1100-10mp:-",
        ]
    );
}

#[test]
fn lenient_feed_skips_without_aborting() {
    let (records, stats) = read_feed_file(&fixture("lenient.xml")).unwrap();
    assert_eq!(stats.records_ok, 2);
    assert_eq!(stats.records_skipped, 1);
    assert_eq!(stats.skip_reasons.get(&SkipReason::BadCpe), Some(&1));
    let ids: Vec<&str> = records.iter().map(|r| r.cve_id.as_str()).collect();
    assert_eq!(ids, ["CVE-2016-1001", "CVE-2016-1003"]);
}

#[test]
fn gzip_is_transparent() {
    let plain = std::fs::read(fixture("two_records.xml")).unwrap();
    let dir = std::env::temp_dir().join(format!("vulnclass-gz-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("two_records.xml.gz");
    let mut enc = GzEncoder::new(File::create(&path).unwrap(), Compression::default());
    enc.write_all(&plain).unwrap();
    enc.finish().unwrap();
    let gz = read_feed_file(&path).unwrap();
    let raw = read_feed_file(&fixture("two_records.xml")).unwrap();
    assert_eq!(gz.0, raw.0);
    assert_eq!(gz.1, raw.1);
    std::fs::remove_dir_all(&dir).unwrap();
}
