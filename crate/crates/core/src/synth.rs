//! Seeded generator of synthetic German privacy policies with right
//! annotations. Used by tests, benches and demos when no real corpus is at
//! hand; it is not a stand-in for real data when judging model quality.

use chrono::{DateTime, TimeZone, Utc};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Annotation, Blob, Document, PolicyRecord};
use crate::rights::Right;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub documents: usize,
    pub blobs_per_document: usize,
    /// Probability that a policy states a given right.
    pub right_probability: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            documents: 20,
            blobs_per_document: 30,
            right_probability: 0.85,
            seed: 7,
        }
    }
}

const COMPANIES: &[&str] = &[
    "Nordlicht GmbH",
    "Bergwerk Digital AG",
    "Stadtwerke Mittelfeld",
    "Kaffeerösterei Hansen",
    "Lernwelt Online GmbH",
    "Fahrradhaus Becker",
    "Mediapunkt KG",
    "Reisebüro Sonnenschein",
];

const FILLER: &[&str] = &[
    "Beim Aufruf unserer Website werden durch den auf Ihrem Endgerät zum Einsatz kommenden Browser automatisch Informationen an den Server unserer Website gesendet.",
    "Diese Informationen werden temporär in einem sogenannten Logfile gespeichert und nach {n} Tagen automatisch gelöscht.",
    "Wir setzen auf unserer Seite Cookies ein. Hierbei handelt es sich um kleine Dateien, die Ihr Browser automatisch erstellt und auf Ihrem Endgerät speichert.",
    "Für die Zahlungsabwicklung geben wir Ihre Zahlungsdaten an das mit der Zahlung beauftragte Kreditinstitut weiter.",
    "Unsere Website wird bei einem externen Dienstleister gehostet, der Ihre Daten ausschließlich in unserem Auftrag verarbeitet.",
    "Zur Analyse der Nutzung unserer Website verwenden wir ein Webanalysedienst, der pseudonyme Nutzungsprofile erstellt.",
    "Wenn Sie unseren Newsletter abonnieren, verwenden wir Ihre E-Mail-Adresse für den Versand von Informationen über unsere Angebote.",
    "Ihre Daten werden nur so lange gespeichert, wie dies für die Erfüllung des Vertrags erforderlich ist oder gesetzliche Aufbewahrungsfristen bestehen.",
    "Die Übertragung von Daten in Drittländer erfolgt nur auf Grundlage von Standardvertragsklauseln der Europäischen Kommission.",
    "Wir treffen technische und organisatorische Sicherheitsmaßnahmen, um Ihre Daten gegen Manipulation, Verlust und unbefugten Zugriff zu schützen.",
    "Bei einer Bewerbung verarbeiten wir die von Ihnen übermittelten Unterlagen ausschließlich zur Durchführung des Bewerbungsverfahrens.",
    "Über das Kontaktformular übermittelte Anfragen speichern wir zur Bearbeitung und für den Fall von Anschlussfragen.",
    "Unsere Website enthält Links zu sozialen Netzwerken, die erst nach einem Klick Daten an den jeweiligen Anbieter übertragen.",
    "Wir verwenden eingebettete Videos eines Drittanbieters im erweiterten Datenschutzmodus.",
    "Die Verarbeitung erfolgt auf Grundlage von Art. 6 Abs. 1 lit. f DSGVO zur Wahrung unseres berechtigten Interesses an einem sicheren Betrieb.",
    "Rechtsgrundlage für den Versand des Newsletters ist Ihre Einwilligung gemäß Art. 6 Abs. 1 lit. a DSGVO.",
    "Verantwortlicher im Sinne der Datenschutz-Grundverordnung ist die {company}, vertreten durch die Geschäftsführung.",
    "Unseren Datenschutzbeauftragten erreichen Sie unter datenschutz@beispiel.de oder unserer Postanschrift.",
    "Eine automatisierte Entscheidungsfindung einschließlich Profiling findet nicht statt.",
    "Wir behalten uns vor, diese Datenschutzerklärung anzupassen, damit sie stets den aktuellen rechtlichen Anforderungen entspricht.",
    "Stand dieser Datenschutzerklärung: {n}. März 2023.",
    "Im Rahmen unseres Onlineshops erheben wir Name, Anschrift und Bestelldaten zur Vertragsabwicklung.",
    "Die Bereitstellung der Daten ist für den Vertragsschluss erforderlich; ohne diese Angaben können wir den Vertrag nicht schließen.",
    "Wir setzen einen Dienst zum Schutz vor Spam ein, der prüft, ob Eingaben durch einen Menschen erfolgen.",
];

fn right_templates(right: Right) -> &'static [&'static str] {
    match right {
        Right::WithdrawConsent => &[
            "Sie haben das Recht, Ihre einmal erteilte Einwilligung jederzeit uns gegenüber zu widerrufen. Die Rechtmäßigkeit der bis zum Widerruf erfolgten Verarbeitung bleibt unberührt.",
            "Eine erteilte Einwilligung können Sie jederzeit mit Wirkung für die Zukunft widerrufen, etwa per E-Mail an {company}.",
            "Widerruf Ihrer Einwilligung: Soweit die Verarbeitung auf Ihrer Einwilligung beruht, können Sie diese jederzeit widerrufen, ohne dass die Rechtmäßigkeit der Verarbeitung bis zum Widerruf berührt wird.",
            "Sie können Ihre Einwilligung zum Erhalt des Newsletters jederzeit widerrufen, zum Beispiel über den Abmeldelink.",
        ],
        Right::DataPortability => &[
            "Sie haben das Recht, Daten, die wir auf Grundlage Ihrer Einwilligung oder in Erfüllung eines Vertrags automatisiert verarbeiten, an sich oder an einen Dritten in einem gängigen, maschinenlesbaren Format aushändigen zu lassen.",
            "Recht auf Datenübertragbarkeit: Sie können verlangen, die Sie betreffenden Daten in einem strukturierten, gängigen und maschinenlesbaren Format zu erhalten.",
            "Gemäß Art. 20 DSGVO haben Sie das Recht auf Datenübertragbarkeit gegenüber der {company}.",
        ],
        Right::Deletion => &[
            "Sie haben das Recht, die Löschung Ihrer bei uns gespeicherten personenbezogenen Daten zu verlangen, soweit nicht die Verarbeitung zur Erfüllung einer rechtlichen Verpflichtung erforderlich ist.",
            "Recht auf Löschung: Sie können verlangen, dass Ihre personenbezogenen Daten unverzüglich gelöscht werden, sofern die gesetzlichen Voraussetzungen vorliegen.",
            "Gemäß Art. 17 DSGVO können Sie die Löschung Ihrer Daten sowie die Berichtigung unrichtiger Daten verlangen.",
        ],
        Right::Complaint => &[
            "Sie haben das Recht, sich bei einer Aufsichtsbehörde zu beschweren, insbesondere in dem Mitgliedstaat Ihres Aufenthaltsorts.",
            "Beschwerderecht: Wenn Sie der Ansicht sind, dass die Verarbeitung gegen die DSGVO verstößt, können Sie sich bei der zuständigen Datenschutzaufsichtsbehörde beschweren.",
            "Ihnen steht ein Beschwerderecht bei der für {company} zuständigen Aufsichtsbehörde zu.",
        ],
        Right::Information => &[
            "Sie haben das Recht, Auskunft über Ihre von uns verarbeiteten personenbezogenen Daten zu verlangen, insbesondere über die Verarbeitungszwecke, die Kategorie der Daten und die Empfänger.",
            "Auskunftsrecht: Sie können jederzeit eine Bestätigung darüber verlangen, ob wir Sie betreffende personenbezogene Daten verarbeiten, und Auskunft über diese Daten erhalten.",
            "Gemäß Art. 15 DSGVO können Sie unentgeltlich Auskunft über Herkunft, Empfänger und Zweck Ihrer gespeicherten Daten erhalten.",
        ],
    }
}

fn synth_timestamp() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2023, 3, 1, 0, 0, 0).single().expect("valid date")
}

fn fill(template: &str, company: &str, rng: &mut ChaCha8Rng) -> String {
    template
        .replace("{company}", company)
        .replace("{n}", &rng.random_range(2..29).to_string())
}

/// Generates one policy. Blob texts are distinct within the document.
pub fn synth_document(id: &str, config: &SynthConfig, rng: &mut ChaCha8Rng) -> Document {
    let company = *COMPANIES.choose(rng).expect("non-empty");
    let mut planned: Vec<(String, Option<Right>)> = Vec::new();
    for right in Right::ALL {
        if rng.random_bool(config.right_probability.clamp(0.0, 1.0)) {
            let copies = if rng.random_bool(0.2) { 2 } else { 1 };
            let mut templates: Vec<&str> = right_templates(right).to_vec();
            templates.shuffle(rng);
            for t in templates.into_iter().take(copies) {
                planned.push((fill(t, company, rng), Some(right)));
            }
        }
    }
    let mut filler: Vec<&str> = FILLER.to_vec();
    let mut round = 0;
    while planned.len() < config.blobs_per_document.max(1) {
        filler.shuffle(rng);
        for t in &filler {
            if planned.len() >= config.blobs_per_document.max(1) {
                break;
            }
            let mut text = fill(t, company, rng);
            if round > 0 {
                text.push_str(&format!(" (Abschnitt {}.{})", round, planned.len()));
            }
            planned.push((text, None));
        }
        round += 1;
    }
    planned.shuffle(rng);
    planned.insert(0, (format!("Datenschutzerklärung der {company}"), None));
    let blobs = planned
        .into_iter()
        .enumerate()
        .map(|(index, (text, right))| {
            let mut blob = Blob::new(index, text);
            if let Some(r) = right {
                let mut a = Annotation::human(r.label(), true);
                a.created_at = synth_timestamp();
                a.passage = Some(blob.text.clone());
                blob.annotate(a);
            }
            blob
        })
        .collect();
    Document {
        id: id.to_string(),
        title: format!("Datenschutzerklärung {company}"),
        language: "de".to_string(),
        blobs,
    }
}

pub fn synth_corpus(config: &SynthConfig) -> Vec<Document> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    (0..config.documents)
        .map(|i| synth_document(&format!("synth-{i:03}"), config, &mut rng))
        .collect()
}

pub fn synth_records(config: &SynthConfig) -> Vec<PolicyRecord> {
    synth_corpus(config).iter().map(Document::to_record).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{document_from_record, Segmentation};

    #[test]
    fn deterministic_and_round_trips() {
        let config = SynthConfig {
            documents: 5,
            ..SynthConfig::default()
        };
        let a = synth_corpus(&config);
        let b = synth_corpus(&config);
        assert_eq!(a, b);
        for d in &a {
            let back = document_from_record(d.to_record(), Segmentation::Paragraph).unwrap();
            assert_eq!(back.blobs.len(), d.blobs.len());
            for r in Right::ALL {
                assert_eq!(back.positives(&r.label()), d.positives(&r.label()));
            }
        }
    }

    #[test]
    fn every_right_appears() {
        let docs = synth_corpus(&SynthConfig::default());
        for r in Right::ALL {
            assert!(docs.iter().any(|d| d.contains_label(&r.label())), "{r}");
        }
        assert!(docs.iter().all(|d| d.blobs.len() >= 30));
    }
}
