//! Answer enums and question wording for the two annotation protocols.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

macro_rules! answer_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $code:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn code(self) -> &'static str {
                match self {
                    $($name::$variant => $code),+
                }
            }

            pub fn from_code(code: &str) -> Option<Self> {
                match code.trim() {
                    $($code => Some($name::$variant),)+
                    _ => None,
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.code())
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(self.code())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let raw = RawAnswer::deserialize(d)?;
                let parsed = match &raw {
                    RawAnswer::Str(s) => $name::from_code(s),
                    RawAnswer::Int(i) => $name::from_code(&i.to_string())
                        .or_else(|| $name::from_code(&format!("+{i}"))),
                };
                parsed.ok_or_else(|| {
                    let allowed: Vec<&str> = $name::ALL.iter().map(|a| a.code()).collect();
                    serde::de::Error::custom(format!(
                        "invalid {} answer {}, expected one of {:?}",
                        stringify!($name),
                        raw,
                        allowed
                    ))
                })
            }
        }
    };
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawAnswer {
    Int(i64),
    Str(String),
}

impl fmt::Display for RawAnswer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RawAnswer::Int(i) => write!(f, "{i}"),
            RawAnswer::Str(s) => write!(f, "{s:?}"),
        }
    }
}

answer_enum!(
    /// Question 1.
    Fluency {
        Yes => "2",
        Somewhat => "1",
        No => "0",
    }
);

answer_enum!(
    /// Questions 2-4: agreement of population, intervention and outcome.
    Agreement {
        Yes => "2",
        Partially => "1",
        No => "0",
        NotApplicable => "NA",
        Other => "Other",
    }
);

answer_enum!(
    /// Questions 5-6: effect direction.
    Effect {
        Positive => "+1",
        NoEffect => "0",
        Negative => "-1",
        NotApplicable => "NA",
        Other => "Other",
    }
);

answer_enum!(
    /// Questions 7-8: strength of claim.
    Strength {
        Strong => "3",
        Moderate => "2",
        Weak => "1",
        Insufficient => "0",
        NotApplicable => "NA",
        Other => "Other",
    }
);

answer_enum!(
    Preference {
        A => "A",
        B => "B",
        Neither => "Neither",
    }
);

/// One facet question as presented to annotators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Question {
    pub id: &'static str,
    pub name: &'static str,
    pub text: &'static str,
    pub options: &'static [AnswerOption],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AnswerOption {
    pub value: &'static str,
    pub label: &'static str,
}

const fn opt(value: &'static str, label: &'static str) -> AnswerOption {
    AnswerOption { value, label }
}

const AGREEMENT_BASE: [AnswerOption; 3] = [opt("2", "Yes"), opt("1", "Partially"), opt("0", "No")];
const EFFECT_BASE: [AnswerOption; 3] = [
    opt("+1", "Positive effect"),
    opt("0", "No effect"),
    opt("-1", "Negative effect"),
];
const STRENGTH_BASE: [AnswerOption; 4] = [
    opt("3", "Strong claim"),
    opt("2", "Moderate claim"),
    opt("1", "Weak claim"),
    opt(
        "0",
        "Not enough evidence (there is insufficient evidence to draw a conclusion)",
    ),
];
const OTHER: AnswerOption = opt("Other", "Comment");

/// The eight facet questions, numbered q1..q8.
pub const FACET_QUESTIONS: [Question; 8] = [
    Question {
        id: "q1",
        name: "Fluency",
        text: "Is the generated summary fluent?",
        options: &[
            opt("2", "Yes--there are no errors that impact comprehension of the summary"),
            opt(
                "1",
                "Somewhat, there are some minor grammatical or lexical errors, but I can mostly understand",
            ),
            opt(
                "0",
                "No, there are major grammatical or lexical errors that impact comprehension",
            ),
        ],
    },
    Question {
        id: "q2",
        name: "Population",
        text: "Is the *population* discussed in the generated summary the same as the population discussed in the target summary?",
        options: &[
            AGREEMENT_BASE[0],
            AGREEMENT_BASE[1],
            AGREEMENT_BASE[2],
            opt("NA", "No population in generated summary"),
            OTHER,
        ],
    },
    Question {
        id: "q3",
        name: "Intervention",
        text: "Is the *intervention* discussed in the generated summary the same as the intervention discussed in the target summary?",
        options: &[
            AGREEMENT_BASE[0],
            AGREEMENT_BASE[1],
            AGREEMENT_BASE[2],
            opt("NA", "No intervention in generated summary"),
            OTHER,
        ],
    },
    Question {
        id: "q4",
        name: "Outcome",
        text: "Is the *outcome* discussed in the generated summary the same as the outcome discussed in the target summary?",
        options: &[
            AGREEMENT_BASE[0],
            AGREEMENT_BASE[1],
            AGREEMENT_BASE[2],
            opt("NA", "No outcome in generated summary"),
            OTHER,
        ],
    },
    Question {
        id: "q5",
        name: "Effect-target",
        text: "What is the effect direction in the *target* summary for the main intervention and outcome considered?",
        options: &[
            EFFECT_BASE[0],
            EFFECT_BASE[1],
            EFFECT_BASE[2],
            opt("NA", "no effect direction is specified in the target summary"),
            OTHER,
        ],
    },
    Question {
        id: "q6",
        name: "Effect-generated",
        text: "What is the effect direction in the *generated* summary for the main intervention and outcome considered?",
        options: &[
            EFFECT_BASE[0],
            EFFECT_BASE[1],
            EFFECT_BASE[2],
            opt("NA", "no effect direction is specified in the generated summary"),
            OTHER,
        ],
    },
    Question {
        id: "q7",
        name: "Strength-target",
        text: "What is the strength of the claim made in the *target* summary?",
        options: &[
            STRENGTH_BASE[0],
            STRENGTH_BASE[1],
            STRENGTH_BASE[2],
            STRENGTH_BASE[3],
            opt("NA", "No claim (there is no claim in the summary)"),
            OTHER,
        ],
    },
    Question {
        id: "q8",
        name: "Strength-generated",
        text: "What is the strength of the claim made in the *generated* summary?",
        options: &[
            STRENGTH_BASE[0],
            STRENGTH_BASE[1],
            STRENGTH_BASE[2],
            STRENGTH_BASE[3],
            opt("NA", "No claim (there is no claim in the summary)"),
            OTHER,
        ],
    },
];

/// The single question asked in a pairwise comparison.
pub const PAIRWISE_QUESTION: Question = Question {
    id: "preference",
    name: "Preference",
    text: "Which of A or B more accurately reflects the content of the target summary?",
    options: &[opt("A", "A"), opt("B", "B"), opt("Neither", "Neither")],
};

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn option_values_match_enums() {
        let codes = |q: &Question| q.options.iter().map(|o| o.value).collect::<Vec<_>>();
        let fl: Vec<&str> = Fluency::ALL.iter().map(|a| a.code()).collect();
        assert_eq!(codes(&FACET_QUESTIONS[0]), fl);
        for q in &FACET_QUESTIONS[1..4] {
            assert_eq!(codes(q), Agreement::ALL.iter().map(|a| a.code()).collect::<Vec<_>>());
        }
        for q in &FACET_QUESTIONS[4..6] {
            assert_eq!(codes(q), Effect::ALL.iter().map(|a| a.code()).collect::<Vec<_>>());
        }
        for q in &FACET_QUESTIONS[6..8] {
            assert_eq!(codes(q), Strength::ALL.iter().map(|a| a.code()).collect::<Vec<_>>());
        }
    }

    #[test]
    fn answers_parse_from_strings_and_integers() {
        assert_eq!(serde_json::from_str::<Effect>("1").unwrap(), Effect::Positive);
        assert_eq!(serde_json::from_str::<Effect>("\"+1\"").unwrap(), Effect::Positive);
        assert_eq!(serde_json::from_str::<Effect>("-1").unwrap(), Effect::Negative);
        assert_eq!(
            serde_json::from_str::<Strength>("\"NA\"").unwrap(),
            Strength::NotApplicable
        );
        assert_eq!(serde_json::from_str::<Fluency>("2").unwrap(), Fluency::Yes);
        let err = serde_json::from_str::<Fluency>("5").unwrap_err();
        assert!(err.to_string().contains("invalid Fluency answer 5"), "{err}");
        assert!(serde_json::from_str::<Fluency>("\"NA\"").is_err());
        assert_eq!(serde_json::to_string(&Effect::Positive).unwrap(), "\"+1\"");
    }
}
