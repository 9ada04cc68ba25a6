//! Deterministic synthetic corpora for end-to-end runs.
//!
//! Each class owns its vendors, products and description vocabulary; a
//! fixed fraction of every summary is drawn from a vocabulary shared by all
//! classes. A few application-only records are mixed in per year and left
//! unlabelled, so hardware selection has something to drop.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use chrono::{FixedOffset, NaiveDate, TimeZone};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cpe::{AttrValue, ConfigExpr, CpeName, LogicalOp, Part};
use crate::nvd::VulnerabilityRecord;

struct ClassVocab {
    code: &'static str,
    vendors: &'static [&'static str],
    products: &'static [&'static str],
    words: &'static [&'static str],
}

const CLASSES: &[ClassVocab] = &[
    ClassVocab {
        code: "A",
        vendors: &["xerox", "ricoh", "synology", "canon", "qnap"],
        products: &[
            "workcentre_7845",
            "aficio_mp",
            "diskstation",
            "imagerunner_c5535",
            "ts_451",
            "colorqube",
        ],
        words: &[
            "printer",
            "copier",
            "nas",
            "storage",
            "scanner",
            "fax",
            "multifunction",
            "toner",
            "media",
            "projector",
            "kiosk",
            "appliance",
            "raid",
            "spool",
        ],
    },
    ClassVocab {
        code: "E",
        vendors: &["cisco", "juniper", "arista", "huawei", "f5"],
        products: &[
            "asr_9000",
            "srx_firewall",
            "catalyst_9300",
            "nexus_7000",
            "big_ip",
            "mx_series",
        ],
        words: &[
            "enterprise",
            "backbone",
            "bgp",
            "mpls",
            "carrier",
            "datacenter",
            "vpn",
            "firewall",
            "ospf",
            "chassis",
            "linecard",
            "provider",
            "trunk",
            "netflow",
        ],
    },
    ClassVocab {
        code: "H",
        vendors: &["netgear", "tp-link", "d-link", "linksys", "belkin"],
        products: &[
            "wnr2000",
            "archer_c7",
            "dir_860l",
            "ea6500",
            "wemo_insight",
            "dcs_930l",
        ],
        words: &[
            "home",
            "router",
            "camera",
            "baby",
            "thermostat",
            "doorbell",
            "smart",
            "plug",
            "household",
            "consumer",
            "parental",
            "wifi",
            "extender",
            "webcam",
        ],
    },
    ClassVocab {
        code: "M",
        vendors: &["samsung", "apple", "motorola", "fitbit", "garmin"],
        products: &[
            "galaxy_s8",
            "iphone_x",
            "moto_g5",
            "versa",
            "forerunner_945",
            "galaxy_tab",
        ],
        words: &[
            "phone",
            "tablet",
            "watch",
            "baseband",
            "bluetooth",
            "sms",
            "handset",
            "wearable",
            "cellular",
            "sim",
            "modem",
            "lte",
            "smartwatch",
            "launcher",
        ],
    },
    ClassVocab {
        code: "P",
        vendors: &["lenovo", "dell", "hp", "supermicro", "intel"],
        products: &[
            "thinkpad_x1",
            "poweredge_r740",
            "elitebook_840",
            "x11_bmc",
            "nuc_kit",
            "optiplex_7050",
        ],
        words: &[
            "laptop",
            "bios",
            "uefi",
            "server",
            "desktop",
            "bmc",
            "chipset",
            "notebook",
            "workstation",
            "processor",
            "microcode",
            "motherboard",
            "ipmi",
            "thunderbolt",
        ],
    },
    ClassVocab {
        code: "S",
        vendors: &["siemens", "schneider-electric", "rockwell", "abb", "moxa"],
        products: &[
            "simatic_s7",
            "modicon_m340",
            "controllogix",
            "ac500",
            "nport_5110",
            "scalance_x",
        ],
        words: &[
            "plc",
            "scada",
            "industrial",
            "controller",
            "hmi",
            "modbus",
            "profinet",
            "substation",
            "relay",
            "turbine",
            "pump",
            "fieldbus",
            "inverter",
            "process",
        ],
    },
];

const NOISE_WORDS: &[&str] = &[
    "remote",
    "attacker",
    "crafted",
    "request",
    "allows",
    "arbitrary",
    "code",
    "execution",
    "denial",
    "service",
    "buffer",
    "overflow",
    "authentication",
    "bypass",
    "injection",
    "cross",
    "site",
    "scripting",
    "memory",
    "corruption",
    "privilege",
    "escalation",
    "unauthenticated",
    "vulnerability",
];

const CWES: &[&str] = &["CWE-20", "CWE-79", "CWE-119", "CWE-287", "CWE-798"];

const APP_VENDORS: &[&str] = &["apache", "oracle", "mozilla", "wordpress"];
const APP_PRODUCTS: &[&str] = &["http_server", "database", "firefox", "plugin"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub first_year: i32,
    pub last_year: i32,
    pub per_class_per_year: usize,
    /// Words per summary.
    pub summary_len: usize,
    /// Fraction of summary words drawn from the shared vocabulary.
    pub noise_fraction: f64,
    /// Unlabelled application-only records added per year.
    pub app_records_per_year: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    /// 6 classes × 200 records over 2014–2018; the last year holds 20%.
    fn default() -> Self {
        SynthConfig {
            first_year: 2014,
            last_year: 2018,
            per_class_per_year: 40,
            summary_len: 10,
            noise_fraction: 0.2,
            app_records_per_year: 5,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub records: Vec<VulnerabilityRecord>,
    pub labels: BTreeMap<String, String>,
}

impl SynthCorpus {
    /// `cve_id,class` rows in id order.
    pub fn labels_csv(&self) -> String {
        let mut out = String::from("cve_id,class\n");
        for (id, class) in &self.labels {
            let _ = writeln!(out, "{id},{class}");
        }
        out
    }
}

/// Class codes the generator emits, sorted.
pub fn class_codes() -> Vec<&'static str> {
    CLASSES.iter().map(|c| c.code).collect()
}

/// A summary made of one class's vocabulary only; handy as a probe.
pub fn class_probe_summary(code: &str) -> Option<String> {
    CLASSES
        .iter()
        .find(|c| c.code == code)
        .map(|c| c.words[..6].join(" "))
}

fn pick<'a>(rng: &mut ChaCha8Rng, items: &[&'a str]) -> &'a str {
    items.choose(rng).expect("non-empty vocabulary")
}

fn cpe(part: Part, vendor: &str, product: &str, version: String) -> CpeName {
    let mut name = CpeName::new(part);
    name.vendor = AttrValue::literal(vendor);
    name.product = AttrValue::literal(product);
    name.version = AttrValue::literal(version);
    name
}

fn record(
    id: String,
    year: i32,
    index: usize,
    cpe: CpeName,
    summary: String,
    cwe: &str,
    score: f64,
) -> VulnerabilityRecord {
    let month = (index % 12) as u32 + 1;
    let day = (index % 28) as u32 + 1;
    let date = NaiveDate::from_ymd_opt(year, month, day)
        .and_then(|d| d.and_hms_opt(12, 0, 0))
        .expect("valid synthetic date");
    let published = FixedOffset::west_opt(4 * 3600)
        .expect("valid offset")
        .from_local_datetime(&date)
        .single();
    let mut rec = VulnerabilityRecord::new(id);
    rec.published = published;
    rec.modified = published;
    rec.cvss_score = Some(score);
    rec.cwe_id = Some(cwe.to_string());
    rec.summary = summary;
    rec.config = Some(ConfigExpr::test(
        LogicalOp::Or,
        false,
        vec![ConfigExpr::leaf(cpe)],
    ));
    rec
}

pub fn generate(config: &SynthConfig) -> SynthCorpus {
    assert!(
        config.per_class_per_year < 1000,
        "at most 999 records per class and year"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let noise_words = ((config.summary_len as f64) * config.noise_fraction).round() as usize;
    let class_words = config.summary_len.saturating_sub(noise_words);
    let mut records = Vec::new();
    let mut labels = BTreeMap::new();

    for year in config.first_year..=config.last_year {
        for (ci, class) in CLASSES.iter().enumerate() {
            for j in 0..config.per_class_per_year {
                let id = format!("CVE-{year}-{}", 10000 + ci * 1000 + j);
                let mut words: Vec<&str> = (0..class_words)
                    .map(|_| pick(&mut rng, class.words))
                    .collect();
                words.extend((0..noise_words).map(|_| pick(&mut rng, NOISE_WORDS)));
                words.shuffle(&mut rng);
                let version = format!("{}.{}", rng.gen_range(1..10), rng.gen_range(0..20));
                let name = cpe(
                    Part::Hardware,
                    pick(&mut rng, class.vendors),
                    pick(&mut rng, class.products),
                    version,
                );
                let cwe = pick(&mut rng, CWES);
                let score = f64::from(rng.gen_range(10..=100u32)) / 10.0;
                labels.insert(id.clone(), class.code.to_string());
                records.push(record(id, year, j, name, words.join(" "), cwe, score));
            }
        }
        for j in 0..config.app_records_per_year {
            let id = format!("CVE-{year}-{}", 19000 + j);
            let words: Vec<&str> = (0..config.summary_len)
                .map(|_| pick(&mut rng, NOISE_WORDS))
                .collect();
            let name = cpe(
                Part::Application,
                pick(&mut rng, APP_VENDORS),
                pick(&mut rng, APP_PRODUCTS),
                "1.0".into(),
            );
            let cwe = pick(&mut rng, CWES);
            records.push(record(id, year, j, name, words.join(" "), cwe, 5.0));
        }
    }
    SynthCorpus { records, labels }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::is_hardware;

    #[test]
    fn shape() {
        let corpus = generate(&SynthConfig::default());
        assert_eq!(corpus.labels.len(), 1200);
        assert_eq!(corpus.records.len(), 1200 + 25);
        assert_eq!(
            corpus.records.iter().filter(|r| is_hardware(r)).count(),
            1200
        );
        for code in class_codes() {
            assert_eq!(
                corpus
                    .labels
                    .values()
                    .filter(|c| c.as_str() == code)
                    .count(),
                200
            );
        }
        let last = corpus
            .labels
            .keys()
            .filter(|id| id.starts_with("CVE-2018-"))
            .count();
        assert_eq!(last, 240);
    }

    #[test]
    fn deterministic_and_seeded() {
        let a = generate(&SynthConfig::default());
        let b = generate(&SynthConfig::default());
        assert_eq!(a.records, b.records);
        let c = generate(&SynthConfig {
            seed: 8,
            ..SynthConfig::default()
        });
        assert_ne!(a.records, c.records);
    }

    #[test]
    fn noise_share() {
        let corpus = generate(&SynthConfig::default());
        let rec = &corpus.records[0];
        let words: Vec<&str> = rec.summary.split(' ').collect();
        assert_eq!(words.len(), 10);
        assert_eq!(words.iter().filter(|w| NOISE_WORDS.contains(w)).count(), 2);
    }

    #[test]
    fn vocabularies_disjoint() {
        let mut seen = std::collections::HashSet::new();
        for class in CLASSES {
            for w in class.words.iter().chain(class.vendors) {
                assert!(seen.insert(*w), "{w} reused");
                assert!(!NOISE_WORDS.contains(w));
            }
        }
    }
}
