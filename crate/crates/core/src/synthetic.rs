//! Seeded generator of NSL-KDD-shaped records for demos and tests.
//!
//! Each label gets a fixed profile (preferred protocol/service/flag and
//! centres for the continuous features); records scatter around it with
//! label noise, so classes overlap but remain learnable. The values carry no
//! meaning beyond that.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{Dataset, FeatureKind, FeatureSchema, Granularity, Record, Value};

const PROTOCOLS: [&str; 3] = ["tcp", "udp", "icmp"];
const SERVICES: [&str; 8] = [
    "http", "private", "ftp_data", "smtp", "domain_u", "ecr_i", "telnet", "other",
];
const FLAGS: [&str; 5] = ["SF", "S0", "REJ", "RSTR", "SH"];

fn label_seed(label: &str) -> u64 {
    // FNV-1a; stable across platforms and runs.
    label.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

struct Profile {
    protocol: usize,
    service: usize,
    flag: usize,
    centres: Vec<f64>,
}

impl Profile {
    fn new(label: &str, n_features: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(label_seed(label));
        Self {
            protocol: rng.gen_range(0..PROTOCOLS.len()),
            service: rng.gen_range(0..SERVICES.len()),
            flag: rng.gen_range(0..FLAGS.len()),
            centres: (0..n_features).map(|_| rng.gen_range(0.0..1.0)).collect(),
        }
    }
}

/// `counts` lists (label, number of records); output keeps that order.
pub fn nsl_like(counts: &[(&str, usize)], seed: u64) -> Dataset {
    let schema = FeatureSchema::nsl_kdd();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::new();
    for &(label, n) in counts {
        let p = Profile::new(label, schema.len());
        for _ in 0..n {
            let typical = rng.gen_bool(0.85);
            let pick = |rng: &mut ChaCha8Rng, preferred: usize, len: usize| {
                if typical || rng.gen_bool(0.5) {
                    preferred
                } else {
                    rng.gen_range(0..len)
                }
            };
            let values = schema
                .features()
                .iter()
                .enumerate()
                .map(|(j, spec)| match (j + 1, spec.kind) {
                    (2, _) => Value::sym(PROTOCOLS[pick(&mut rng, p.protocol, PROTOCOLS.len())]),
                    (3, _) => Value::sym(SERVICES[pick(&mut rng, p.service, SERVICES.len())]),
                    (4, _) => Value::sym(FLAGS[pick(&mut rng, p.flag, FLAGS.len())]),
                    (_, FeatureKind::Discrete) => Value::sym(if rng.gen_bool(p.centres[j]) { "1" } else { "0" }),
                    (20, _) => Value::Num(0.0),
                    (5 | 6, _) => {
                        let centre = (p.centres[j] * 5000.0).round();
                        Value::Num((centre + rng.gen_range(-300.0f64..300.0)).max(0.0).round())
                    }
                    _ => {
                        let centre = if typical { p.centres[j] } else { rng.gen_range(0.0..1.0) };
                        let v: f64 = (centre + rng.gen_range(-0.15..0.15)).clamp(0.0, 1.0);
                        Value::Num((v * 100.0).round() / 100.0)
                    }
                })
                .collect();
            records.push(Record::new(values, label));
        }
    }
    Dataset::new(schema, records, Granularity::Attack23).expect("generated records follow the schema")
}
