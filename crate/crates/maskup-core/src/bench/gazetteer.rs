//! Word lists backing the synthetic corpora: entity names by class plus
//! the filler vocabulary for O tokens.

use crate::error::{Error, Result};

/// Entity and filler word lists for corpus generation. Location entries
/// may contain spaces and expand to multi-token spans.
#[derive(Debug, Clone)]
pub struct Gazetteers {
    pub person_first: Vec<String>,
    pub person_last: Vec<String>,
    pub org_stems: Vec<String>,
    pub org_suffixes: Vec<String>,
    pub locations: Vec<String>,
    pub miscs: Vec<String>,
    pub fillers: Vec<String>,
}

fn owned(words: &[&str]) -> Vec<String> {
    words.iter().map(|w| w.to_string()).collect()
}

impl Gazetteers {
    pub fn builtin() -> Gazetteers {
        Gazetteers {
            person_first: owned(&[
                "Anna", "Bruno", "Carla", "David", "Elena", "Farid", "Greta", "Hugo", "Irene",
                "Jonas", "Karim", "Laura", "Marco", "Nadia", "Omar", "Petra", "Quentin", "Rosa",
                "Stefan", "Tanja", "Ulrike", "Victor", "Wanda", "Xavier", "Yusuf", "Zelda",
                "Amara", "Boris", "Celine", "Dimitri", "Esther", "Felix", "Gloria", "Henrik",
                "Isabel", "Jorge", "Katja", "Lionel", "Miriam", "Nikolai",
            ]),
            person_last: owned(&[
                "Abreu", "Baumann", "Cardoso", "Duarte", "Eriksen", "Fontaine", "Gutierrez",
                "Hansen", "Ivanov", "Jensen", "Keller", "Lindqvist", "Moreau", "Novak", "Olsen",
                "Petrov", "Quiroga", "Rossi", "Schneider", "Takahashi", "Urbano", "Vazquez",
                "Weber", "Xiong", "Yamamoto", "Zhang", "Almeida", "Bergstrom", "Castillo",
                "Dvorak", "Engel", "Ferrara", "Gruber", "Holm", "Ibarra", "Janssen", "Kovacs",
                "Larsen", "Molnar", "Nakamura",
            ]),
            org_stems: owned(&[
                "Acme", "Nortech", "Helios", "Vertex", "Zenith", "Polaris", "Meridian",
                "Cascade", "Pinnacle", "Solstice", "Citadel", "Vanguard", "Frontier", "Beacon",
                "Catalyst", "Lumina", "Keystone", "Arcadia", "Sentinel", "Triton", "Borealis",
                "Ardent", "Caldera", "Everglade", "Fathom", "Granite", "Harbinger", "Icarus",
                "Juniper", "Krypton",
            ]),
            org_suffixes: owned(&[
                "Corporation", "Industries", "Laboratories", "Group", "Institute", "Holdings",
                "Systems", "Partners", "Foundation", "Consortium", "Logistics", "Analytics",
            ]),
            locations: owned(&[
                "Oslo", "Lisbon", "Prague", "Nairobi", "Quito", "Santiago", "Vienna", "Warsaw",
                "Dublin", "Helsinki", "Athens", "Manila", "Jakarta", "Lagos", "Toronto",
                "Melbourne", "Geneva", "Marseille", "Valencia", "Porto", "Krakow", "Bergen",
                "Tampere", "Cusco", "Mendoza", "Cartagena", "Zanzibar", "Kyoto", "Osaka",
                "Busan", "Hanoi", "Colombo", "Dakar", "Accra", "Tunis", "Amman", "Muscat",
                "Riga", "Tallinn", "Vilnius", "Buenos Aires", "Kuala Lumpur", "Addis Ababa",
                "San Marino", "Port Moresby", "Costa Rica",
            ]),
            miscs: owned(&[
                "Olympics", "Ramadan", "Easter", "Carnival", "Oktoberfest", "Diwali",
                "Hanukkah", "Eurovision", "Biennale", "Regatta", "Danish", "Peruvian",
                "Finnish", "Maltese", "Kenyan", "Thai", "Irish", "Czech", "Dutch", "Swiss",
                "Korean", "Chilean", "Basque", "Flemish", "Catalan", "Norwegian",
            ]),
            fillers: owned(&[
                "the", "a", "an", "on", "in", "at", "to", "from", "with", "was", "were", "is",
                "met", "visited", "said", "wrote", "signed", "opened", "joined", "left",
                "today", "yesterday", "tomorrow", "soon", "later", "again", "quietly",
                "report", "meeting", "plan", "budget", "team", "project", "update", "review",
                "notes", "draft", "deal", "talks", "visit",
            ]),
        }
    }

    /// Office-memo style capitalized O vocabulary: weekday, month, and
    /// title-cased jargon words that are not entities.
    pub fn capitalized_fillers() -> Vec<String> {
        owned(&[
            "Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday", "Sunday",
            "January", "February", "March", "April", "June", "July", "August", "September",
            "October", "November", "December", "Spring", "Summer", "Autumn", "Winter",
            "Budget", "Report", "Agenda", "Deadline", "Quarter", "Update", "Invoice",
            "Payroll", "Roadmap", "Sprint", "Backlog", "Demo", "Review", "Memo", "Minutes",
            "Offsite", "Kickoff", "Handover",
        ])
    }

    pub fn with_fillers(mut self, fillers: Vec<String>) -> Gazetteers {
        self.fillers = fillers;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let lists: [(&str, &[String]); 7] = [
            ("person_first", &self.person_first),
            ("person_last", &self.person_last),
            ("org_stems", &self.org_stems),
            ("org_suffixes", &self.org_suffixes),
            ("locations", &self.locations),
            ("miscs", &self.miscs),
            ("fillers", &self.fillers),
        ];
        for (name, list) in lists {
            if list.is_empty() {
                return Err(Error::Contract(format!("empty gazetteer list {name:?}")));
            }
        }
        Ok(())
    }

    /// Split every entity list in half for two-task experiments. Filler
    /// vocabulary is shared between the halves.
    pub fn split(&self) -> (Gazetteers, Gazetteers) {
        fn halves(list: &[String]) -> (Vec<String>, Vec<String>) {
            let mid = list.len().div_ceil(2);
            (list[..mid].to_vec(), list[mid..].to_vec())
        }
        let (first_a, first_b) = halves(&self.person_first);
        let (last_a, last_b) = halves(&self.person_last);
        let (stems_a, stems_b) = halves(&self.org_stems);
        let (suf_a, suf_b) = halves(&self.org_suffixes);
        let (loc_a, loc_b) = halves(&self.locations);
        let (misc_a, misc_b) = halves(&self.miscs);
        (
            Gazetteers {
                person_first: first_a,
                person_last: last_a,
                org_stems: stems_a,
                org_suffixes: suf_a,
                locations: loc_a,
                miscs: misc_a,
                fillers: self.fillers.clone(),
            },
            Gazetteers {
                person_first: first_b,
                person_last: last_b,
                org_stems: stems_b,
                org_suffixes: suf_b,
                locations: loc_b,
                miscs: misc_b,
                fillers: self.fillers.clone(),
            },
        )
    }
}
