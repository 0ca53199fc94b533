//! Line-delimited JSON dataset files.
//!
//! Conversation file: one `{"id", "turns": [{"speaker", "text", "label"}]}`
//! object per line, labels given by name. Vector file: one
//! `{"features": [..], "label": <int>}` object per line. Blank lines are
//! ignored.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{tokenize, Conversation, LabelTable, Turn, VectorExample};
use crate::error::{Error, Result};
use crate::numerics::check_finite;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TurnRecord {
    pub speaker: String,
    pub text: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConversationRecord {
    pub id: String,
    pub turns: Vec<TurnRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VectorRecord {
    pub features: Vec<f64>,
    pub label: usize,
}

fn for_each_record<R: Read, T: for<'de> Deserialize<'de>>(
    reader: R,
    mut f: impl FnMut(usize, T) -> Result<()>,
) -> Result<()> {
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: T = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        f(line_no, record)?;
    }
    Ok(())
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

pub fn read_conversations<R: Read>(reader: R, labels: &LabelTable) -> Result<Vec<Conversation>> {
    let mut out = Vec::new();
    for_each_record(reader, |line, rec: ConversationRecord| {
        if rec.turns.is_empty() {
            return Err(Error::Parse {
                line,
                message: format!("conversation {:?} has no turns", rec.id),
            });
        }
        let turns = rec
            .turns
            .into_iter()
            .map(|t| {
                let label = labels.id(&t.label).ok_or_else(|| Error::UnknownLabel {
                    line,
                    label: t.label.clone(),
                })?;
                Ok(Turn {
                    speaker: t.speaker,
                    text: tokenize(&t.text),
                    label,
                })
            })
            .collect::<Result<_>>()?;
        out.push(Conversation { id: rec.id, turns });
        Ok(())
    })?;
    Ok(out)
}

pub fn load_conversations(path: &Path, labels: &LabelTable) -> Result<Vec<Conversation>> {
    read_conversations(open(path)?, labels).map_err(|e| e.context(path.display().to_string()))
}

pub fn read_vector_examples<R: Read>(reader: R) -> Result<Vec<VectorExample>> {
    let mut out = Vec::new();
    for_each_record(reader, |line, rec: VectorRecord| {
        if rec.features.is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty feature vector".into(),
            });
        }
        check_finite(&rec.features, "features").map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        out.push(VectorExample {
            features: rec.features,
            label: rec.label,
        });
        Ok(())
    })?;
    Ok(out)
}

pub fn load_vector_examples(path: &Path) -> Result<Vec<VectorExample>> {
    read_vector_examples(open(path)?).map_err(|e| e.context(path.display().to_string()))
}

pub fn write_conversations<W: Write>(writer: W, conversations: &[Conversation], labels: &LabelTable) -> Result<()> {
    let mut w = BufWriter::new(writer);
    for conv in conversations {
        let rec = ConversationRecord {
            id: conv.id.clone(),
            turns: conv
                .turns
                .iter()
                .map(|t| {
                    Ok(TurnRecord {
                        speaker: t.speaker.clone(),
                        text: t.text.join(" "),
                        label: labels
                            .name(t.label)
                            .ok_or(Error::LabelOutOfRange {
                                label: t.label,
                                classes: labels.len(),
                            })?
                            .to_string(),
                    })
                })
                .collect::<Result<_>>()?,
        };
        write_record(&mut w, &rec)?;
    }
    w.flush().map_err(|e| Error::io(Path::new("<conversation writer>"), e))
}

pub fn write_vector_examples<W: Write>(writer: W, examples: &[VectorExample]) -> Result<()> {
    let mut w = BufWriter::new(writer);
    for ex in examples {
        let rec = VectorRecord {
            features: ex.features.clone(),
            label: ex.label,
        };
        write_record(&mut w, &rec)?;
    }
    w.flush().map_err(|e| Error::io(Path::new("<vector writer>"), e))
}

fn write_record<W: Write, T: Serialize>(w: &mut W, rec: &T) -> Result<()> {
    let line = serde_json::to_string(rec).map_err(|e| Error::Parse {
        line: 0,
        message: e.to_string(),
    })?;
    writeln!(w, "{line}").map_err(|e| Error::io(Path::new("<dataset writer>"), e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn table() -> LabelTable {
        LabelTable::new(["neutral", "joy", "anger"]).unwrap()
    }

    #[test]
    fn empty_input() {
        assert!(read_conversations("".as_bytes(), &table()).unwrap().is_empty());
        assert!(read_vector_examples("\n\n".as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn single_turn_dialogue() {
        let line = r#"{"id":"d0","turns":[{"speaker":"Joey","text":"Thanks a lot","label":"joy"}]}"#;
        let convs = read_conversations(line.as_bytes(), &table()).unwrap();
        assert_eq!(convs.len(), 1);
        assert_eq!(convs[0].turns.len(), 1);
        assert_eq!(convs[0].turns[0].label, 1);
        assert_eq!(convs[0].turns[0].text, vec!["thanks", "a", "lot"]);
        assert_eq!(convs[0].turns[0].speaker, "Joey");
    }

    #[test]
    fn errors_name_line_and_label() {
        let text = "\n{\"id\":\"a\",\"turns\":[{\"speaker\":\"x\",\"text\":\"hi\",\"label\":\"joy\"}]}\n{oops";
        match read_conversations(text.as_bytes(), &table()) {
            Err(Error::Parse { line: 3, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        let text = r#"{"id":"a","turns":[{"speaker":"x","text":"hi","label":"fear"}]}"#;
        match read_conversations(text.as_bytes(), &table()) {
            Err(Error::UnknownLabel { line: 1, label }) => assert_eq!(label, "fear"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(read_vector_examples(r#"{"features":[1.0],"label":-1}"#.as_bytes()).is_err());
        assert!(read_vector_examples(r#"{"features":[],"label":1}"#.as_bytes()).is_err());
        assert!(read_vector_examples(r#"{"features":[1.0],"label":1,"extra":2}"#.as_bytes()).is_err());
    }

    #[test]
    fn random_datasets_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let labels = table();
        let convs: Vec<Conversation> = (0..20)
            .map(|c| Conversation {
                id: format!("dialogue-{c}"),
                turns: (0..rng.random_range(1..6))
                    .map(|_| Turn {
                        speaker: ["Joey", "Mr. Geller", "rachel"][rng.random_range(0..3)].to_string(),
                        text: (0..rng.random_range(0..6)).map(|k| format!("w{}", k * 7 % 5)).collect(),
                        label: rng.random_range(0..3),
                    })
                    .collect(),
            })
            .collect();
        let mut buf = Vec::new();
        write_conversations(&mut buf, &convs, &labels).unwrap();
        assert_eq!(read_conversations(buf.as_slice(), &labels).unwrap(), convs);

        let examples: Vec<VectorExample> = (0..50)
            .map(|_| VectorExample {
                features: (0..5).map(|_| rng.random_range(-1e3..1e3) * rng.random::<f64>()).collect(),
                label: rng.random_range(0..9),
            })
            .collect();
        let mut buf = Vec::new();
        write_vector_examples(&mut buf, &examples).unwrap();
        let back = read_vector_examples(buf.as_slice()).unwrap();
        assert_eq!(back, examples);
        for (a, b) in back.iter().zip(&examples) {
            assert!(a.features.iter().zip(&b.features).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn missing_file_names_path() {
        let err = load_vector_examples(Path::new("/definitely/not/here.jsonl")).unwrap_err();
        assert!(err.to_string().contains("/definitely/not/here.jsonl"));
    }
}
