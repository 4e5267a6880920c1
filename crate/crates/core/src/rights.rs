//! The five GDPR data subject rights used as extraction targets, with the
//! statutory provisions each one is anchored to.

use crate::corpus::{LabelId, LabelNode, LabelSchema};

/// A GDPR provision (article, paragraph, point) in English and German.
#[derive(Debug, Clone, Copy)]
pub struct Provision {
    pub reference: &'static str,
    pub en: &'static str,
    pub de: &'static str,
}

const ART_13_2_B: Provision = Provision {
    reference: "13(2b)",
    en: "the existence of the right to request from the controller access to and rectification or erasure of personal data or restriction of processing concerning the data subject or to object to processing as well as the right to data portability;",
    de: "das Bestehen eines Rechts auf Auskunft seitens des Verantwortlichen über die betreffenden personenbezogenen Daten sowie auf Berichtigung oder Löschung oder auf Einschränkung der Verarbeitung oder eines Widerspruchsrechts gegen die Verarbeitung sowie des Rechts auf Datenübertragbarkeit;",
};

const ART_13_2_C: Provision = Provision {
    reference: "13(2c)",
    en: "where the processing is based on point (a) of Article 6(1) or point (a) of Article 9(2), the existence of the right to withdraw consent at any time, without affecting the lawfulness of processing based on consent before its withdrawal;",
    de: "wenn die Verarbeitung auf Artikel 6 Absatz 1 Buchstabe a oder Artikel 9 Absatz 2 Buchstabe a beruht, das Bestehen eines Rechts, die Einwilligung jederzeit zu widerrufen, ohne dass die Rechtmäßigkeit der aufgrund der Einwilligung bis zum Widerruf erfolgten Verarbeitung berührt wird;",
};

const ART_13_2_D: Provision = Provision {
    reference: "13(2d)",
    en: "the right to lodge a complaint with a supervisory authority;",
    de: "das Bestehen eines Beschwerderechts bei einer Aufsichtsbehörde;",
};

// Art. 14(2)(c)-(e) repeat 13(2)(b)-(d) for data not obtained from the data subject.
const ART_14_2_C: Provision = Provision {
    reference: "14(2c)",
    en: ART_13_2_B.en,
    de: ART_13_2_B.de,
};

const ART_14_2_D: Provision = Provision {
    reference: "14(2d)",
    en: ART_13_2_C.en,
    de: ART_13_2_C.de,
};

const ART_14_2_E: Provision = Provision {
    reference: "14(2e)",
    en: ART_13_2_D.en,
    de: ART_13_2_D.de,
};

const ART_15_1: Provision = Provision {
    reference: "15(1)",
    en: "The data subject shall have the right to obtain from the controller confirmation as to whether or not personal data concerning him or her are being processed, and, where that is the case, access to the personal data and the following information:",
    de: "Die betroffene Person hat das Recht, von dem Verantwortlichen eine Bestätigung darüber zu verlangen, ob sie betreffende personenbezogene Daten verarbeitet werden; ist dies der Fall, so hat sie ein Recht auf Auskunft über diese personenbezogenen Daten und auf folgende Informationen:",
};

const ART_15_1_E: Provision = Provision {
    reference: "15(1e)",
    en: "the existence of the right to request from the controller rectification or erasure of personal data or restriction of processing of personal data concerning the data subject or to object to such processing;",
    de: "das Bestehen eines Rechts auf Berichtigung oder Löschung der sie betreffenden personenbezogenen Daten oder auf Einschränkung der Verarbeitung durch den Verantwortlichen oder eines Widerspruchsrechts gegen diese Verarbeitung;",
};

const ART_15_1_F: Provision = Provision {
    reference: "15(1f)",
    en: "the existence of the right to lodge a complaint with a supervisory authority;",
    de: "das Bestehen eines Beschwerderechts bei einer Aufsichtsbehörde;",
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Right {
    WithdrawConsent,
    DataPortability,
    Deletion,
    Complaint,
    Information,
}

impl Right {
    pub const ALL: [Right; 5] = [
        Right::WithdrawConsent,
        Right::DataPortability,
        Right::Deletion,
        Right::Complaint,
        Right::Information,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Right::WithdrawConsent => "right_withdraw_consent",
            Right::DataPortability => "right_data_portability",
            Right::Deletion => "right_deletion",
            Right::Complaint => "right_complaint",
            Right::Information => "right_information",
        }
    }

    pub fn label(self) -> LabelId {
        LabelId::new(self.id())
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Right::WithdrawConsent => "Right to Withdraw Consent",
            Right::DataPortability => "Right to Data Portability",
            Right::Deletion => "Right to Correction or Deletion",
            Right::Complaint => "Right to Complaint",
            Right::Information => "Right to Information",
        }
    }

    pub fn provisions(self) -> &'static [Provision] {
        match self {
            Right::WithdrawConsent => &[ART_13_2_C, ART_14_2_D],
            Right::DataPortability | Right::Deletion => &[ART_13_2_B, ART_14_2_C, ART_15_1_E],
            Right::Complaint => &[ART_13_2_D, ART_14_2_E, ART_15_1_F],
            Right::Information => &[ART_13_2_B, ART_14_2_C, ART_15_1],
        }
    }

    pub fn gdpr_references(self) -> String {
        self.provisions()
            .iter()
            .map(|p| p.reference)
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Anchor query text: the referenced provisions in the corpus language,
    /// with verbatim repeats (14(2) restating 13(2)) dropped.
    pub fn anchor_text(self, language: &str) -> String {
        let mut parts: Vec<&str> = Vec::new();
        for p in self.provisions() {
            let text = if language.eq_ignore_ascii_case("de") {
                p.de
            } else {
                p.en
            };
            if !parts.contains(&text) {
                parts.push(text);
            }
        }
        parts.join(" ")
    }

    pub fn from_id(id: &str) -> Option<Right> {
        Right::ALL.into_iter().find(|r| r.id() == id)
    }

    /// Positive blob counts per right in the reference 60-policy dataset.
    pub fn reference_blob_count(self) -> usize {
        match self {
            Right::Information => 83,
            Right::Deletion => 87,
            Right::DataPortability => 77,
            Right::WithdrawConsent => 95,
            Right::Complaint => 80,
        }
    }
}

impl std::fmt::Display for Right {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.id())
    }
}

pub fn rights_schema() -> LabelSchema {
    let children = Right::ALL
        .iter()
        .map(|r| LabelNode {
            id: r.label(),
            name: r.display_name().to_string(),
            description: format!("GDPR Art. {}: {}", r.gdpr_references(), r.anchor_text("en")),
            children: Vec::new(),
        })
        .collect();
    LabelSchema::new(LabelNode {
        id: LabelId::new("data_subject_rights"),
        name: "Data Subject Rights".to_string(),
        description: "Rights granted to data subjects under Art. 13-15 GDPR".to_string(),
        children,
    })
    .expect("built-in schema is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_round_trip() {
        for r in Right::ALL {
            assert_eq!(Right::from_id(r.id()), Some(r));
        }
        assert_eq!(Right::from_id("right_to_party"), None);
    }

    #[test]
    fn anchors_are_language_specific_and_deduplicated() {
        let de = Right::WithdrawConsent.anchor_text("de");
        assert!(de.contains("Einwilligung jederzeit zu widerrufen"));
        // 13(2c) and 14(2d) share wording; it must appear once.
        assert_eq!(de.matches("Einwilligung jederzeit").count(), 1);
        let en = Right::Complaint.anchor_text("en");
        assert!(en.contains("lodge a complaint with a supervisory authority"));
    }

    #[test]
    fn reference_counts() {
        let total: usize = Right::ALL.iter().map(|r| r.reference_blob_count()).sum();
        assert_eq!(total, 83 + 87 + 77 + 95 + 80);
    }

    #[test]
    fn schema_has_root_and_five_rights() {
        let schema = rights_schema();
        assert_eq!(schema.len(), 6);
        assert_eq!(schema.depth(), 2);
    }
}
