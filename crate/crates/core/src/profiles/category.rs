//! Categorical survey fields.
//!
//! Each category parses from its snake_case name, its table label (case and
//! separator insensitive), or its 1-based code in declaration order.

use serde::{Deserialize, Serialize};

pub trait Category: Sized + Copy + 'static {
    const ALL: &'static [Self];

    /// Stable snake_case identifier.
    fn name(&self) -> &'static str;

    /// Label used in summary tables.
    fn label(&self) -> &'static str;

    fn parse(raw: &str) -> Option<Self> {
        let key = normalize(raw);
        if key.is_empty() {
            return None;
        }
        if let Ok(code) = key.parse::<usize>() {
            return code.checked_sub(1).and_then(|i| Self::ALL.get(i)).copied();
        }
        Self::ALL
            .iter()
            .find(|c| normalize(c.name()) == key || normalize(c.label()) == key)
            .copied()
    }
}

fn normalize(raw: &str) -> String {
    raw.trim()
        .chars()
        .map(|c| if c.is_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect::<String>()
        .split('_')
        .filter(|s| !s.is_empty())
        .collect::<Vec<_>>()
        .join("_")
}

macro_rules! category {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => ($snake:literal, $label:literal)),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum $name { $($variant),+ }

        impl Category for $name {
            const ALL: &'static [Self] = &[$($name::$variant),+];

            fn name(&self) -> &'static str {
                match self { $($name::$variant => $snake),+ }
            }

            fn label(&self) -> &'static str {
                match self { $($name::$variant => $label),+ }
            }
        }

        impl std::fmt::Display for $name {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str(self.name())
            }
        }
    };
}

category!(Sex {
    Man => ("man", "man"),
    Woman => ("woman", "woman"),
});

category!(Marital {
    Married => ("married", "married"),
    Divorced => ("divorced", "divorced"),
    Widowed => ("widowed", "widowed"),
    NeverMarried => ("never_married", "never married"),
});

category!(Education {
    Grade0To8 => ("grade_0_8", "Grade 0-8 without a high school diploma"),
    Grade9To12 => ("grade_9_12", "Grade 9-12 without a high school diploma"),
    HighSchool => ("high_school", "Grade 0-12 with a high school diploma"),
    SomeCollege => ("some_college", "Grade 13-17 without a college degree"),
    College => ("college", "Grade 13-16 with a college degree"),
    Graduate => ("graduate", "Grade 17 with a college degree"),
});

category!(Region {
    Western => ("western", "Western"),
    NorthCentral => ("north_central", "North Central"),
    Northeastern => ("northeastern", "Northeastern"),
    Southern => ("southern", "Southern"),
});

category!(PoliticalAffiliation {
    Republican => ("republican", "Republican"),
    Democrat => ("democrat", "Democrat"),
    IndependentLeanRepublican => ("independent_lean_republican", "Independent (but closer to Republican)"),
    IndependentLeanDemocrat => ("independent_lean_democrat", "Independent (but closer to Democrat)"),
    IndependentNoPreference => ("independent_no_preference", "Independent (no preference)"),
});

category!(IncomeBand {
    VeryLow => ("very_low", "very low"),
    Low => ("low", "low"),
    Middle => ("middle", "middle"),
    High => ("high", "high"),
    VeryHigh => ("very_high", "very high"),
});

category!(
    /// Directional prior: more / about the same / less.
    Direction {
        Increase => ("increase", "increase"),
        Same => ("same", "about the same"),
        Decrease => ("decrease", "decrease"),
    }
);

category!(Confidence {
    ExtremelyWeak => ("extremely_weak", "extremely weak"),
    Weak => ("weak", "weak"),
    Moderate => ("moderate", "moderate"),
    Strong => ("strong", "strong"),
    ExtremelyStrong => ("extremely_strong", "extremely strong"),
});

category!(Trend {
    ContinuouslyDecrease => ("continuously_decrease", "continuously decrease"),
    StayConstant => ("stay_constant", "stay constant"),
    ContinuouslyIncrease => ("continuously_increase", "continuously increase"),
});

category!(KnowledgeType {
    Fomc => ("fomc", "FOMC"),
    News => ("news", "News"),
    Wikipedia => ("wikipedia", "Wikipedia"),
});

impl Direction {
    /// Also accepts the survey's wording (more/less, up/down) and its 1/3/5
    /// response codes.
    pub fn parse_survey(raw: &str) -> Option<Self> {
        match normalize(raw).as_str() {
            "1" | "more" | "up" | "increase" | "higher" | "go_up" => Some(Direction::Increase),
            "3" | "same" | "about_the_same" | "stay_the_same" => Some(Direction::Same),
            "5" | "less" | "down" | "decrease" | "lower" | "go_down" => Some(Direction::Decrease),
            _ => None,
        }
    }
}
