//! Writes the 2018 fixture set: rosters, synthetic materials, per-meeting
//! scripts, ground truth and a campaign config.
//!
//! Usage: `cargo run -p fomcsim-core --example make_fixtures [-- <dir>]`
//! (default `fixtures/2018`). Regenerate the golden transcripts afterwards
//! with `fomcsim campaign --config <dir>/campaign.toml --output-dir <dir>/golden`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use fomcsim_core::engine::script::{with_stance, MeetingScript, VoterLines};
use fomcsim_core::engine::MeetingSettings;
use fomcsim_core::materials::{chunk_document, DocKind, MaterialDoc};
use fomcsim_core::persona::VoteDirection::{self, Decrease as Dn, Increase as Up, Maintain as Hold};
use fomcsim_core::units::{MeetingDate, PolicyRate};

struct Meeting {
    date: &'static str,
    /// Target rate before the meeting, bp.
    prev: u32,
    /// Actual decided rate, bp.
    real_new: u32,
    /// Alternatives A, B, C as bp targets.
    alts: [u32; 3],
    initial: [VoteDirection; 5],
    final_vote: [VoteDirection; 5],
    real: [VoteDirection; 5],
    seed: u64,
}

const fn std_alts(prev: u32) -> [u32; 3] {
    [prev + 25, prev, prev - 25]
}

/// Voters in roster order: chair, Dudley, Brainard, Bostic, Mester.
const MEETINGS: [Meeting; 8] = [
    Meeting {
        date: "2018-01",
        prev: 125,
        real_new: 125,
        alts: std_alts(125),
        initial: [Up, Up, Up, Hold, Up],
        final_vote: [Hold, Hold, Up, Up, Up],
        real: [Hold, Hold, Hold, Hold, Hold],
        seed: 201801,
    },
    Meeting {
        date: "2018-03",
        prev: 125,
        real_new: 150,
        alts: std_alts(125),
        initial: [Up, Up, Up, Up, Up],
        final_vote: [Up, Up, Hold, Hold, Up],
        real: [Up, Up, Up, Up, Up],
        seed: 201803,
    },
    Meeting {
        date: "2018-05",
        prev: 150,
        real_new: 150,
        alts: std_alts(150),
        initial: [Hold, Hold, Hold, Hold, Hold],
        final_vote: [Hold, Hold, Hold, Up, Hold],
        real: [Hold, Hold, Hold, Hold, Hold],
        seed: 201805,
    },
    Meeting {
        date: "2018-06",
        prev: 150,
        real_new: 175,
        alts: std_alts(150),
        initial: [Up, Up, Up, Up, Up],
        final_vote: [Up, Up, Up, Up, Up],
        real: [Up, Up, Up, Up, Up],
        seed: 201806,
    },
    Meeting {
        date: "2018-07",
        prev: 175,
        real_new: 175,
        alts: [200, 150, 175],
        initial: [Up, Up, Up, Up, Up],
        final_vote: [Hold, Hold, Up, Up, Hold],
        real: [Hold, Hold, Hold, Hold, Hold],
        seed: 201807,
    },
    Meeting {
        date: "2018-09",
        prev: 175,
        real_new: 200,
        alts: std_alts(175),
        initial: [Up, Up, Up, Up, Up],
        final_vote: [Hold, Up, Hold, Hold, Up],
        real: [Up, Up, Up, Up, Up],
        seed: 201809,
    },
    Meeting {
        date: "2018-11",
        prev: 200,
        real_new: 200,
        alts: std_alts(200),
        initial: [Up, Hold, Up, Up, Up],
        final_vote: [Hold, Hold, Hold, Hold, Hold],
        real: [Hold, Hold, Hold, Hold, Hold],
        seed: 201811,
    },
    Meeting {
        date: "2018-12",
        prev: 200,
        real_new: 225,
        alts: std_alts(200),
        initial: [Up, Up, Up, Up, Up],
        final_vote: [Up, Hold, Up, Up, Hold],
        real: [Up, Up, Up, Up, Up],
        seed: 201812,
    },
];

const DISTRICTS: [&str; 12] = [
    "Boston",
    "New York",
    "Philadelphia",
    "Cleveland",
    "Richmond",
    "Atlanta",
    "Chicago",
    "St. Louis",
    "Minneapolis",
    "Kansas City",
    "Dallas",
    "San Francisco",
];

const YELLEN: &str = r#"[[agent]]
name = "J. Yellen"
full_name = "Janet Yellen"
role = "chair"
gender = "female"
education = ["B.A. in economics, Brown University", "Ph.D. in economics, Yale University"]
past_positions = ["Professor, University of California, Berkeley", "Chair, Council of Economic Advisers", "President, Federal Reserve Bank of San Francisco", "Vice Chair, Board of Governors"]
stance = "Focuses on the labor market and favors a gradual path of rate increases while inflation remains below the 2 percent objective."
personality = "Careful, data-driven and consensus-seeking; explains reasoning in plain terms."
"#;

const POWELL: &str = r#"[[agent]]
name = "J. Powell"
full_name = "Jerome Powell"
role = "chair"
gender = "male"
education = ["B.A. in politics, Princeton University", "J.D., Georgetown University"]
past_positions = ["Under Secretary of the Treasury", "Partner, The Carlyle Group", "Governor, Federal Reserve Board"]
stance = "Supports continued gradual normalization of policy while the economy is strong and stresses risk management."
personality = "Pragmatic and plain-spoken; weighs evidence from many sources before deciding."
"#;

const OTHERS: &str = r#"[[agent]]
name = "W. Dudley"
full_name = "William Dudley"
role = "vice_chair"
gender = "male"
education = ["B.A., New College of Florida", "Ph.D. in economics, University of California, Berkeley"]
past_positions = ["Chief U.S. Economist, Goldman Sachs", "Head of the Markets Group, Federal Reserve Bank of New York", "President, Federal Reserve Bank of New York"]
stance = "Attentive to financial conditions; favors steady, predictable tightening."
personality = "Measured and market-minded; prefers to avoid surprising investors."

[[agent]]
name = "L. Brainard"
full_name = "Lael Brainard"
role = "governor"
gender = "female"
education = ["B.A., Wesleyan University", "Ph.D. in economics, Harvard University"]
past_positions = ["Under Secretary of the Treasury for International Affairs", "Deputy National Economic Adviser"]
stance = "Watches global risks and inflation expectations closely; open to adjusting the pace of increases."
personality = "Analytical and cautious; raises downside scenarios."

[[agent]]
name = "R. Bostic"
full_name = "Raphael Bostic"
role = "regional_president"
gender = "male"
education = ["B.A., Harvard University", "Ph.D. in economics, Stanford University"]
past_positions = ["Professor, University of Southern California", "Assistant Secretary, Department of Housing and Urban Development", "President, Federal Reserve Bank of Atlanta"]
stance = "Prefers a patient approach that leaves policy near neutral; attentive to regional business contacts."
personality = "Collegial and practical; relies on what businesses in the Southeast report."

[[agent]]
name = "L. Mester"
full_name = "Loretta Mester"
role = "regional_president"
gender = "female"
education = ["B.A., Barnard College", "Ph.D. in economics, Princeton University"]
past_positions = ["Director of Research, Federal Reserve Bank of Philadelphia", "President, Federal Reserve Bank of Cleveland"]
stance = "Concerned about overheating in a strong labor market; favors continuing gradual increases."
personality = "Direct and methodical; grounds arguments in forecasts."

[[agent]]
name = "Staff Economist"
role = "economist"
gender = "female"
education = ["Ph.D. in economics"]
past_positions = ["Senior economist, Division of Monetary Affairs"]

[[agent]]
name = "Legal Counsel"
role = "legal_expert"
gender = "male"
education = ["J.D."]
past_positions = ["Associate General Counsel, Board of Governors"]
"#;

/// Published alignment rates, percent.
const PUBLISHED: [(&str, f64); 6] = [
    ("J. Yellen", 0.0),
    ("J. Powell", 85.7),
    ("W. Dudley", 87.5),
    ("L. Brainard", 50.0),
    ("R. Bostic", 37.5),
    ("L. Mester", 75.0),
];

fn rate(bp: u32) -> String {
    PolicyRate::from_bp(bp).unwrap().fixed_percent().trim_end_matches('%').to_string()
}

fn chair(date: &str) -> &'static str {
    if date == "2018-01" {
        "J. Yellen"
    } else {
        "J. Powell"
    }
}

fn voters(date: &str) -> [&'static str; 5] {
    [chair(date), "W. Dudley", "L. Brainard", "R. Bostic", "L. Mester"]
}

fn beige_book(m: &Meeting, date: MeetingDate) -> String {
    let month = date.previous_month().month_name();
    let k = MEETINGS.iter().position(|x| x.date == m.date).unwrap();
    let pace = ["modest", "moderate", "solid", "steady"][k % 4];
    let wages = ["edged up", "rose modestly", "increased moderately", "grew at a faster pace"][(k + 1) % 4];
    let mut out = String::new();
    for (i, d) in DISTRICTS.iter().enumerate() {
        let _ = writeln!(out, "== {d} ==");
        let _ = writeln!(
            out,
            "Economic activity in the {d} District expanded at a {pace} pace from early {month} through the survey period."
        );
        let _ = writeln!(
            out,
            "Employers described labor markets as tight, and wages {wages}. Contacts in {} reported {}.",
            ["manufacturing", "retail", "construction", "agriculture"][i % 4],
            ["higher input costs from tariffs", "steady demand", "shortages of skilled workers", "softer orders"][(i + k) % 4],
        );
        if *d == "Cleveland" {
            let _ = writeln!(
                out,
                "Automobile dealers in the Cleveland area described demand for new vehicles as {} and noted rising used-car sales.",
                ["flat", "improving", "mixed", "softening"][k % 4]
            );
        }
        let _ = writeln!(out, "Prices increased {} overall.\n", ["slightly", "modestly", "moderately", "at a steady pace"][(i * 3 + k) % 4]);
    }
    out
}

fn tealbook(m: &Meeting) -> String {
    let growth = 2.0 + (m.alts[0] as f64 - 150.0) / 200.0;
    format!(
        "== Domestic Outlook ==\nStaff project real GDP growth of about {growth:.1} percent this year, above potential.\n\n\
         == Labor Market ==\nThe unemployment rate is projected to remain near 4 percent.\n\n\
         == Inflation ==\nPCE inflation is projected to run close to 2 percent.\n\n\
         == Risks ==\nRisks to the outlook are roughly balanced, with trade policy an important source of uncertainty.\n"
    )
}

fn alternatives_text(m: &Meeting) -> String {
    let why = |d: VoteDirection| match d {
        Up => "Continued strength in the labor market and inflation near the objective support removing accommodation.",
        Hold => "Keeping the target range unchanged allows the committee to assess incoming data.",
        Dn => "Lowering the rate would guard against downside risks from trade tensions.",
    };
    let prev = PolicyRate::from_bp(m.prev).unwrap();
    ["A", "B", "C"]
        .iter()
        .zip(m.alts)
        .map(|(l, bp)| {
            let d = VoteDirection::between(prev, PolicyRate::from_bp(bp).unwrap());
            format!("ALT {l}: {} | {} | {}", rate(bp), d.keyword(), why(d))
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn label_for(m: &Meeting, d: VoteDirection) -> &'static str {
    let prev = PolicyRate::from_bp(m.prev).unwrap();
    let i = m.alts.iter().position(|&bp| VoteDirection::between(prev, PolicyRate::from_bp(bp).unwrap()) == d).unwrap();
    ["A", "B", "C"][i]
}

fn view(d: VoteDirection) -> &'static str {
    match d {
        Up => "raising the target range by 25 basis points",
        Hold => "keeping the target range unchanged",
        Dn => "lowering the target range by 25 basis points",
    }
}

fn script(m: &Meeting, setup_turns: usize, turns: usize) -> MeetingScript {
    let voter_lines = voters(m.date)
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let (a, b) = (m.initial[i], m.final_vote[i]);
            let debate = (0..turns)
                .map(|t| {
                    let d = if t == 0 { a } else { b };
                    let text = if t == 0 || a == b {
                        format!("{name}: on balance I continue to favor {}.", view(d))
                    } else {
                        format!("{name}: having heard my colleagues, I now favor {}.", view(d))
                    };
                    with_stance(&text, d)
                })
                .collect();
            VoterLines {
                name: name.to_string(),
                private_idea: with_stance(&format!("Private assessment by {name}: the materials point toward {}.", view(a)), a),
                first_round: with_stance(&format!("{name}: my initial view is {}.", view(a)), a),
                debate,
                vote: format!("I support Alternative {}.\n\nVOTE: {}", label_for(m, b), label_for(m, b)),
            }
        })
        .collect();
    MeetingScript {
        setup_turns,
        default_reply: "Completed".into(),
        economist: "Staff Economist".into(),
        alternatives: alternatives_text(m),
        legal_expert: "Legal Counsel".into(),
        legal_review: "Alternative A is consistent with the statutory mandate. Alternative B is consistent with the \
                       mandate. Alternative C is also within the committee's authority."
            .into(),
        voters: voter_lines,
    }
}

fn write(path: PathBuf, text: &str) {
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    fs::write(&path, text).unwrap();
}

fn main() {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("fixtures/2018"));
    let dir: &Path = &dir;
    let settings = MeetingSettings::default();

    write(dir.join("rosters/2018-01.toml"), &format!("{YELLEN}\n{OTHERS}"));
    write(dir.join("rosters/2018.toml"), &format!("{POWELL}\n{OTHERS}"));

    let mut campaign = String::from(
        "# 2018 campaign on the scripted backend.\noutput_dir = \"out\"\nroster = \"rosters/2018.toml\"\n\n\
         [backend]\nkind = \"scripted\"\n\n[settings]\nturns_per_voter = 3\n",
    );
    let mut truth = String::from("schema_version = 1\n\n[published_alignment]\n");
    for (name, p) in PUBLISHED {
        let _ = writeln!(truth, "\"{name}\" = {p:.1}");
    }

    for m in &MEETINGS {
        let date: MeetingDate = m.date.parse().unwrap();
        let bb = beige_book(m, date);
        let tb = tealbook(m);
        let bb_path = format!("materials/{}-beige-book.txt", m.date);
        let tb_path = format!("materials/{}-tealbook-a.txt", m.date);
        write(dir.join(&bb_path), &bb);
        write(dir.join(&tb_path), &tb);
        let chunks: usize = [(bb, DocKind::BeigeBook), (tb, DocKind::TealBookA)]
            .iter()
            .map(|(text, kind)| {
                let doc = MaterialDoc::parse(text, *kind, date).unwrap();
                chunk_document(&doc, settings.max_chunk).unwrap().len()
            })
            .sum();
        let s = script(m, 1 + chunks, settings.turns_per_voter);
        let script_path = format!("scripts/{}.json", m.date);
        write(dir.join(&script_path), &(serde_json::to_string_pretty(&s.to_script()).unwrap() + "\n"));

        let _ = write!(
            campaign,
            "\n[[meeting]]\ndate = \"{}\"\ncurrent_rate = \"{}\"\nseed = {}\n",
            m.date,
            rate(m.prev),
            m.seed
        );
        if m.date == "2018-01" {
            campaign.push_str("roster = \"rosters/2018-01.toml\"\n");
        }
        let _ = write!(
            campaign,
            "materials = [\n  {{ kind = \"beige_book\", path = \"{bb_path}\" }},\n  {{ kind = \"tealbook_a\", path = \"{tb_path}\" }},\n]\nscript = \"{script_path}\"\n"
        );

        let _ = write!(
            truth,
            "\n[[meeting]]\ndate = \"{}\"\nprev_rate = \"{}\"\nnew_rate = \"{}\"\nvotes = [\n",
            m.date,
            rate(m.prev),
            rate(m.real_new)
        );
        for (name, d) in voters(m.date).iter().zip(m.real) {
            let _ = writeln!(truth, "  {{ agent = \"{name}\", direction = \"{}\" }},", d.verb());
        }
        truth.push_str("]\n");
    }
    write(dir.join("campaign.toml"), &campaign);
    write(dir.join("ground_truth.toml"), &truth);
    println!("wrote fixtures to {}", dir.display());
}
