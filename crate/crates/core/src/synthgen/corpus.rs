//! A small corpus of network-device fingerprints for demos and tests.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

const VENDORS: [(&str, &[&str], &str); 10] = [
    (
        "Sonos",
        &["Play 1", "Play 3", "Beam", "One"],
        "urn:schemas-upnp-org:device:ZonePlayer:1",
    ),
    (
        "Philips",
        &["Hue Bridge", "Hue Go"],
        "urn:schemas-upnp-org:device:Basic:1",
    ),
    (
        "Samsung",
        &["UE55", "QE65", "SmartThings Hub"],
        "urn:schemas-upnp-org:device:MediaRenderer:1",
    ),
    (
        "LG",
        &["OLED55", "webOS TV"],
        "urn:schemas-upnp-org:device:MediaRenderer:1",
    ),
    (
        "Google",
        &["Chromecast", "Nest Mini", "Nest Hub"],
        "urn:dial-multiscreen-org:device:dial:1",
    ),
    (
        "Amazon",
        &["Echo Dot", "Fire TV Stick"],
        "urn:dial-multiscreen-org:device:dial:1",
    ),
    (
        "Hikvision",
        &["DS-2CD2042", "DS-7608NI"],
        "urn:schemas-upnp-org:device:Basic:1",
    ),
    (
        "Axis",
        &["M3045", "P1448"],
        "urn:axis-com:device:NetworkCamera:1",
    ),
    (
        "Synology",
        &["DS218", "DS920"],
        "urn:schemas-upnp-org:device:Basic:1",
    ),
    (
        "Netgear",
        &["Nighthawk R7000", "Orbi"],
        "urn:schemas-upnp-org:device:InternetGatewayDevice:1",
    ),
];

const SERVICES: [&str; 8] = [
    "AVTransport",
    "RenderingControl",
    "ConnectionManager",
    "ContentDirectory",
    "WANIPConnection",
    "Layer3Forwarding",
    "DeviceProtection",
    "GroupRenderingControl",
];

const MDNS: [&str; 7] = [
    "_googlecast",
    "_airplay",
    "_raop",
    "_hap",
    "_spotify-connect",
    "_http",
    "_smb",
];
const DHCP_CLASSES: [&str; 5] = [
    "udhcp 1.24",
    "dhcpcd-6.8",
    "MSFT 5.0",
    "android-dhcp-9",
    "Linux 4.9",
];
const HOSTS: [&str; 12] = [
    "living-room",
    "kitchen",
    "office",
    "garage",
    "bedroom",
    "hallway",
    "porch",
    "attic",
    "den",
    "lobby",
    "nas",
    "router",
];

/// `n` device documents, deterministic in `seed`. Nodes reach depth 4
/// (`upnp[].services[]`); a typical document has around 25 nodes.
pub fn device_corpus(n: usize, seed: u64) -> Vec<Value> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| device(&mut rng)).collect()
}

fn device<R: Rng>(rng: &mut R) -> Value {
    let (vendor, models, device_type) = *VENDORS.choose(rng).expect("vendors");
    let mut doc = Map::new();
    if rng.random_bool(0.9) {
        doc.insert("mac_vendor".into(), json!(vendor));
    }
    if rng.random_bool(0.7) {
        doc.insert("hostname".into(), json!(HOSTS.choose(rng)));
    }
    if rng.random_bool(0.7) {
        doc.insert("wired".into(), json!(u8::from(rng.random_bool(0.5))));
    }
    if rng.random_bool(0.8) {
        doc.insert("ssdp".into(), json!(rng.random_bool(0.6)));
    }
    if rng.random_bool(0.6) {
        let mut dhcp = Map::new();
        if rng.random_bool(0.7) {
            dhcp.insert("vendor_class".into(), json!(DHCP_CLASSES.choose(rng)));
        }
        if rng.random_bool(0.5) {
            dhcp.insert("hostname".into(), json!(HOSTS.choose(rng)));
        }
        doc.insert("dhcp".into(), Value::Object(dhcp));
    }
    let n_upnp = [0, 1, 1, 2, 3][rng.random_range(0..5)];
    let upnp: Vec<Value> = (0..n_upnp)
        .map(|_| {
            let mut item = Map::new();
            if rng.random_bool(0.9) {
                item.insert("manufacturer".into(), json!(vendor));
            }
            if rng.random_bool(0.8) {
                item.insert("model_name".into(), json!(models.choose(rng)));
            }
            if rng.random_bool(0.6) {
                item.insert("device_type".into(), json!(device_type));
            }
            let n_services = rng.random_range(0..4);
            let services: Vec<Value> = (0..n_services)
                .map(|_| json!(SERVICES.choose(rng)))
                .collect();
            item.insert("services".into(), Value::Array(services));
            Value::Object(item)
        })
        .collect();
    doc.insert("upnp".into(), Value::Array(upnp));
    if rng.random_bool(0.5) {
        let n_services = rng.random_range(1..4);
        let services: Vec<Value> = (0..n_services).map(|_| json!(MDNS.choose(rng))).collect();
        let mut mdns = Map::new();
        mdns.insert("services".into(), Value::Array(services));
        if rng.random_bool(0.5) {
            mdns.insert(
                "name".into(),
                json!(format!("{vendor} {}", models.choose(rng).expect("models"))),
            );
        }
        doc.insert("mdns".into(), Value::Object(mdns));
    }
    Value::Object(doc)
}
