//! Synthetic corpora and datasets for the acceptance suite.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use polyview_core::acoa::LevelProfile;
use polyview_core::eval::EvalItem;
use rand::rngs::StdRng;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};

/// Builds one CCD document with sequential node ids.
pub struct DocBuilder {
    doc_id: String,
    title: String,
    next: usize,
    sections: Vec<Value>,
}

impl DocBuilder {
    pub fn new(doc_id: &str, title: &str) -> Self {
        Self {
            doc_id: doc_id.into(),
            title: title.into(),
            next: 0,
            sections: Vec::new(),
        }
    }

    fn id(&mut self) -> String {
        self.next += 1;
        format!("n{}", self.next)
    }

    pub fn paragraph(&mut self, text: &str) -> Value {
        json!({"id": self.id(), "kind": "paragraph", "text": text})
    }

    pub fn table(&mut self, caption: Option<&str>, rows: &[Vec<String>]) -> Value {
        let id = self.id();
        let mut children = Vec::new();
        if let Some(c) = caption {
            children.push(json!({"id": self.id(), "kind": "caption", "text": c}));
        }
        for row in rows {
            let rid = self.id();
            let cells: Vec<Value> = row
                .iter()
                .map(|c| json!({"id": self.id(), "kind": "table_cell", "text": c}))
                .collect();
            children.push(json!({"id": rid, "kind": "table_row", "children": cells}));
        }
        json!({"id": id, "kind": "table", "children": children})
    }

    pub fn section(&mut self, title: &str, children: Vec<Value>) {
        let id = self.id();
        self.sections.push(json!({"id": id, "kind": "section", "text": title, "children": children}));
    }

    pub fn build(self) -> (String, Value) {
        let v = json!({
            "metadata": {"doc_id": self.doc_id, "title": self.title, "doc_type": "manual"},
            "root": {"id": "root", "kind": "section", "children": self.sections},
        });
        (self.doc_id, v)
    }
}

pub fn write_corpus(dir: &Path, docs: &[(String, Value)]) {
    fs::create_dir_all(dir).unwrap();
    for (id, v) in docs {
        fs::write(dir.join(format!("{id}.ccd.json")), serde_json::to_string_pretty(v).unwrap()).unwrap();
    }
}

pub fn write_dataset(path: &Path, items: &[EvalItem]) {
    let lines: String = items
        .iter()
        .map(|i| serde_json::to_string(i).unwrap() + "\n")
        .collect();
    fs::write(path, lines).unwrap();
}

/// Pronounceable made-up words, unique within one generator.
pub struct Names {
    rng: StdRng,
    used: BTreeSet<String>,
}

impl Names {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: StdRng::seed_from_u64(seed),
            used: BTreeSet::new(),
        }
    }

    pub fn word(&mut self) -> String {
        const ONSET: &[&str] = &["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "kr", "tr"];
        const VOWEL: &[&str] = &["a", "e", "i", "o", "u"];
        const CODA: &[&str] = &["k", "n", "r", "x", "l", "s"];
        loop {
            let mut w = String::new();
            for _ in 0..self.rng.random_range(2..=3) {
                w.push_str(ONSET.choose(&mut self.rng).unwrap());
                w.push_str(VOWEL.choose(&mut self.rng).unwrap());
            }
            w.push_str(CODA.choose(&mut self.rng).unwrap());
            if self.used.insert(w.clone()) {
                return w;
            }
        }
    }

    pub fn rng(&mut self) -> &mut StdRng {
        &mut self.rng
    }
}

pub fn cap(w: &str) -> String {
    let mut c = w.chars();
    c.next().map(|f| f.to_uppercase().chain(c).collect()).unwrap_or_default()
}

const FILLER: &[&str] = &[
    "Keep the work area clean and well lit.",
    "Record every inspection in the logbook.",
    "Wear gloves when handling sharp edges.",
    "Tighten fasteners in a cross pattern.",
    "Store spare parts in a dry cabinet.",
    "Replace worn labels as soon as they fade.",
    "Disconnect power before opening the cover.",
    "Check that warning lights work after service.",
    "Allow the unit to cool before cleaning.",
    "Report unusual vibration to the supervisor.",
    "Use only approved cleaning agents on painted surfaces.",
    "Keep the manual near the equipment at all times.",
    "Inspect cables for cuts or crushed insulation.",
    "Lubricate hinges with light machine oil.",
    "Return tools to the shadow board after use.",
    "Verify the emergency stop before each shift.",
];

const SECTION_TITLES: &[&str] = &["Overview", "Installation", "Maintenance", "Troubleshooting", "Storage", "Safety"];

pub struct RecoveryCase {
    pub query: String,
    pub doc_id: String,
    /// Source node id of the target paragraph.
    pub node: String,
}

/// Fifty manuals; twenty carry a section whose made-up title is the only
/// link between a query and its target paragraph.
pub fn recovery_corpus() -> (Vec<(String, Value)>, Vec<RecoveryCase>) {
    let mut names = Names::new(11);
    let mut docs = Vec::new();
    let mut cases = Vec::new();
    for d in 0..50 {
        let doc_id = format!("manual-{d:02}");
        let mut b = DocBuilder::new(&doc_id, &format!("Equipment Manual {d}"));
        for s in 0..3 {
            let rng = names.rng();
            let picks: Vec<&&str> = FILLER.choose_multiple(rng, 2).collect();
            let paras = vec![b.paragraph(picks[0]), b.paragraph(picks[1])];
            b.section(SECTION_TITLES[(d + s) % SECTION_TITLES.len()], paras);
        }
        if d < 20 {
            let (w1, w2) = (names.word(), names.word());
            let query = format!("What is listed under {w1} {w2}?");
            let text = distant_sentence(&query);
            let para = b.paragraph(&text);
            let node = para["id"].as_str().unwrap().to_string();
            b.section(&format!("{} {}", cap(&w1), cap(&w2)), vec![para]);
            cases.push(RecoveryCase {
                query,
                doc_id: doc_id.clone(),
                node,
            });
        }
        docs.push(b.build());
    }
    (docs, cases)
}

const DISTANT: &[&str] = &[
    "Pump oil flows freely from valve cups.",
    "Bolt cups go onto rubber knob ports.",
    "Fuzzy cords plug into box slots.",
    "Spray zinc onto rough bolt heads.",
    "Jumpy gyro pods buzz on loops.",
];

/// The candidate sentence least similar to `query` under the mock embedding.
fn distant_sentence(query: &str) -> String {
    let q = polyview_core::spaces::mock_embed(query, 256);
    DISTANT
        .iter()
        .min_by(|a, b| {
            let ca = q.cosine(&polyview_core::spaces::mock_embed(a, 256));
            let cb = q.cosine(&polyview_core::spaces::mock_embed(b, 256));
            ca.partial_cmp(&cb).unwrap()
        })
        .unwrap()
        .to_string()
}

fn item(question: String, ground_truth: String, level: LevelProfile, doc: &str) -> EvalItem {
    EvalItem {
        question,
        ground_truth,
        level,
        rationale: None,
        source_docs: Some(vec![doc.to_string()]),
    }
}

const L1_NOUNS: [&str; 10] = ["compressor", "generator", "winch", "conveyor", "boiler", "turbine", "mixer", "press", "lathe", "crane"];
const L2_PARTS: [&str; 10] = ["valve", "pump", "gasket", "bearing", "sensor", "relay", "hose", "nozzle", "bracket", "filter"];
const L2_OTHER: [&str; 5] = ["flange", "clamp", "spring", "washer", "bushing"];
const L3_NOUNS: [&str; 10] = ["spindle", "rotor", "piston", "impeller", "gearbox", "actuator", "coupling", "damper", "shaft", "housing"];
const L3_ATTRS: [[&str; 3]; 10] = [
    ["rated", "torque", "limit"],
    ["peak", "flow", "capacity"],
    ["burst", "pressure", "margin"],
    ["duty", "cycle", "ceiling"],
    ["thermal", "shutdown", "point"],
    ["acoustic", "noise", "floor"],
    ["seal", "service", "life"],
    ["drift", "tolerance", "window"],
    ["inrush", "current", "threshold"],
    ["holding", "force", "reserve"],
];
const L3_FILLER_ROWS: [[&str; 2]; 8] = [
    ["Mass", "12 kg"],
    ["Length", "40 cm"],
    ["Finish", "anodized"],
    ["Colour", "grey"],
    ["Mounting", "four bolts"],
    ["Warranty", "two years"],
    ["Origin", "assembled locally"],
    ["Packaging", "wooden crate"],
];
const L4_NOUNS: [&str; 10] = ["alloy", "resin", "cable", "coating", "membrane", "laminate", "adhesive", "fiber", "ceramic", "polymer"];
const L4_ATTRS: [[&str; 2]; 10] = [
    ["creep", "strain"],
    ["yield", "stress"],
    ["shear", "modulus"],
    ["fatigue", "index"],
    ["swell", "factor"],
    ["bond", "strength"],
    ["tensile", "load"],
    ["wear", "loss"],
    ["crack", "growth"],
    ["gloss", "retention"],
];
const ROW_KEYS: [&str; 10] = ["grade", "class", "tier", "series", "batch", "mark", "lot", "size", "gauge", "pack"];
const COL_KEYS: [&str; 10] = ["zone", "phase", "stage", "band", "ring", "step", "bay", "lane", "deck", "port"];

/// Lookup-table fixture: rows keyed `<row key> 100/120/140`, columns
/// `<col key> 1/2/3`. Returns the grid and the cell at (`r`, `c`).
fn keyed_grid(rk: &str, ck: &str, seed: usize, r: usize, c: usize) -> (Vec<Vec<String>>, String) {
    let mut rows = vec![std::iter::once(cap(rk))
        .chain((1..=3).map(|j| format!("{} {j}", cap(ck))))
        .collect::<Vec<_>>()];
    let mut answer = String::new();
    for (i, key) in [100, 120, 140].iter().enumerate() {
        let mut row = vec![format!("{} {key}", cap(rk))];
        for j in 0..3 {
            let v = format!("{}.{:02}", 1 + seed % 7, (seed * 13 + i * 29 + j * 7) % 89 + 10);
            if i == r && j == c {
                answer = v.clone();
            }
            row.push(v);
        }
        rows.push(row);
    }
    (rows, answer)
}

/// Forty items, ten per capability level, over one shared corpus.
pub fn level_suite() -> (Vec<(String, Value)>, Vec<EvalItem>) {
    let mut names = Names::new(22);
    let mut docs = Vec::new();
    let mut items = Vec::new();

    for (i, noun) in L1_NOUNS.iter().enumerate() {
        let code = names.word();
        let hours = 1000 + 37 * i;
        let mut b = DocBuilder::new(&format!("plain-{i}"), &format!("{} {noun} guide", cap(&code)));
        let p = b.paragraph(&format!("The {code} {noun} runs for {hours} hours between overhauls."));
        let f = b.paragraph(FILLER[i]);
        b.section("Service Life", vec![p, f]);
        docs.push(b.build());
        items.push(item(
            format!("How many hours does the {code} {noun} run between overhauls?"),
            format!("{hours} hours"),
            LevelProfile::L1,
            &format!("plain-{i}"),
        ));
    }

    let mut notes = DocBuilder::new("part-notes", "General part notes");
    let mut note_paras = Vec::new();
    for part in L2_PARTS {
        for t in [
            format!("Every {part} has ratings stamped near the inlet."),
            format!("A worn {part} can lose its ratings quickly."),
            format!("Inspect {part} ratings before every season."),
            format!("The ratings of a {part} depend on temperature."),
        ] {
            note_paras.push(notes.paragraph(&t));
        }
    }
    notes.section("General Notes", note_paras);
    docs.push(notes.build());
    for (i, part) in L2_PARTS.iter().enumerate() {
        let code = names.word();
        let value = format!("{} kPa", 300 + 17 * i);
        let doc_id = format!("grid-{i}");
        let mut b = DocBuilder::new(&doc_id, &format!("{} parts list", cap(&code)));
        let mut rows = vec![vec!["Component".to_string(), "Rating".into(), "Material".into()]];
        for (j, other) in L2_OTHER.iter().enumerate() {
            rows.push(vec![
                format!("{} {other}", cap(&names.word())),
                format!("{} kPa", 900 + 31 * i + j),
                "brass".into(),
            ]);
            if j == 2 {
                rows.push(vec![format!("{} {part}", cap(&code)), value.clone(), "steel".into()]);
            }
        }
        let t = b.table(None, &rows);
        b.section(&format!("{} Specifications", cap(&code)), vec![t]);
        docs.push(b.build());
        items.push(item(
            format!("What rating does the {code} {part} carry?"),
            value,
            LevelProfile::L2,
            &doc_id,
        ));
    }

    let mut eng = DocBuilder::new("engineering-notes", "Engineering notes");
    let mut eng_paras = Vec::new();
    for [a, b_, c] in L3_ATTRS {
        for t in [
            format!("{} {b_} varies between production batches.", cap(a)),
            format!("{} {c} is verified at final inspection.", cap(b_)),
            format!("{} {c} figures assume nominal ambient conditions.", cap(a)),
            format!("Field {a} {b_} readings may differ from the datasheet."),
            format!("Quoted {b_} {c} values carry a five percent allowance."),
        ] {
            eng_paras.push(eng.paragraph(&t));
        }
    }
    eng.section("Measurement Notes", eng_paras);
    docs.push(eng.build());
    for (i, (noun, [a, b_, c])) in L3_NOUNS.iter().zip(L3_ATTRS).enumerate() {
        let code = names.word();
        let value = format!("{} units", 40 + 11 * i);
        let doc_id = format!("xref-{i}");
        let mut b = DocBuilder::new(&doc_id, &format!("{} {noun} manual", cap(&code)));
        let p = b.paragraph(&format!(
            "The {code} {noun} ships fully assembled. Its characteristics are listed in Table 1."
        ));
        b.section(&format!("{} Assembly", cap(&code)), vec![p]);
        let mut rows = vec![vec!["Property".to_string(), "Value".into()]];
        for (j, [k, v]) in L3_FILLER_ROWS.iter().enumerate() {
            rows.push(vec![k.to_string(), v.to_string()]);
            if j == 3 {
                rows.push(vec![format!("{} {b_} {c}", cap(a)), value.clone()]);
            }
        }
        let t = b.table(Some("Table 1: Characteristics"), &rows);
        b.section("Appendix", vec![t]);
        docs.push(b.build());
        items.push(item(
            format!("What is the {a} {b_} {c} of the {code} {noun}?"),
            value,
            LevelProfile::L3,
            &doc_id,
        ));
    }

    for (i, (noun, [a, b_])) in L4_NOUNS.iter().zip(L4_ATTRS).enumerate() {
        let code = names.word();
        let (rk, ck) = (ROW_KEYS[i], COL_KEYS[i]);
        let (r, c) = (i % 3, (i / 3) % 3);
        let (grid, value) = keyed_grid(rk, ck, i, r, c);
        let doc_id = format!("tool-{i}");
        let mut b = DocBuilder::new(&doc_id, &format!("{} {noun} datasheet", cap(&code)));
        let p = b.paragraph(&format!(
            "{} {noun} {a} {b_} values by {rk} and {ck} are listed in Table 1.",
            cap(&code)
        ));
        b.section(&format!("{} Properties", cap(&code)), vec![p]);
        let t = b.table(Some(&format!("Table 1: {} {b_} by {rk} and {ck}", cap(a))), &grid);
        b.section("Appendix", vec![t]);
        docs.push(b.build());
        items.push(item(
            format!(
                "What is the {a} {b_} of {code} {noun} at {rk}-{} in {ck}-{}?",
                [100, 120, 140][r],
                c + 1
            ),
            value,
            LevelProfile::L4,
            &doc_id,
        ));
    }
    (docs, items)
}

const A3_NOUNS: [&str; 10] = ["gasket", "anode", "spring", "bellows", "diaphragm", "bushing", "gear", "nozzle", "clutch", "sleeve"];
const A3_ATTRS: [[&str; 2]; 10] = [
    ["leak", "rate"],
    ["corrosion", "depth"],
    ["preload", "loss"],
    ["stroke", "wear"],
    ["rupture", "margin"],
    ["friction", "drag"],
    ["backlash", "gap"],
    ["spray", "angle"],
    ["slip", "torque"],
    ["bore", "clearance"],
];
const NEUTRAL: &[&str] = &[
    "Readings were taken by an accredited laboratory during the spring campaign.",
    "Each specimen was conditioned for two days before testing began.",
    "The campaign followed the procedure agreed with the customer in advance.",
    "Results outside the expected envelope were repeated on a second rig.",
    "Operators documented every deviation in the shared laboratory journal.",
    "Final figures were reviewed by two engineers before publication.",
];

/// Ten lookup questions whose citing paragraph sits just below the first
/// retrieval cutoff, behind five closer but table-free notes.
pub fn reflection_suite() -> (Vec<(String, Value)>, Vec<EvalItem>) {
    let mut names = Names::new(33);
    let mut docs = Vec::new();
    let mut items = Vec::new();
    for (i, (noun, [a, b_])) in A3_NOUNS.iter().zip(A3_ATTRS).enumerate() {
        let code = names.word();
        let (rk, ck) = (ROW_KEYS[(i + 3) % 10], COL_KEYS[(i + 5) % 10]);
        let (r, c) = ((i + 1) % 3, (i + 2) % 3);
        let (grid, value) = keyed_grid(rk, ck, i + 20, r, c);
        let doc_id = format!("report-{i}");
        let mut b = DocBuilder::new(&doc_id, &format!("{} {noun} test report", cap(&code)));
        let notes = [
            format!("The {code} {noun} {a} {b_} was noted."),
            format!("The {code} {noun} {a} {b_} looked normal."),
            format!("The {code} {noun} {a} {b_} stayed stable."),
            format!("The {code} {noun} {a} {b_} was logged."),
            format!("The {code} {noun} {a} {b_} met the plan."),
        ];
        let paras: Vec<Value> = notes.iter().map(|t| b.paragraph(t)).collect();
        b.section(&format!("{} {} Notes", cap(&code), cap(noun)), paras);
        let mut long = format!("Measured {a} {b_} figures for the {code} {noun} appear in Table 1.");
        for s in NEUTRAL {
            long.push(' ');
            long.push_str(s);
        }
        let p = b.paragraph(&long);
        b.section("Laboratory Record", vec![p]);
        let t = b.table(Some(&format!("Table 1: Results by {rk} and {ck}")), &grid);
        b.section("Appendix", vec![t]);
        docs.push(b.build());
        items.push(item(
            format!(
                "What is the {a} {b_} of {code} {noun} at {rk}-{} in {ck}-{}?",
                [100, 120, 140][r],
                c + 1
            ),
            value,
            LevelProfile::L4,
            &doc_id,
        ));
    }
    (docs, items)
}
