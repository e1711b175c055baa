//! Placeholder values: how profile fields read inside prompts.

use std::collections::BTreeMap;

use crate::profiles::{
    Confidence, Direction, Education, ExpertProfile, HouseholdProfile, IncomeBand, KnowledgeType, Marital,
    PoliticalAffiliation, Region, Sex, Trend, UnemploymentPrior,
};

pub type Values = BTreeMap<&'static str, String>;

pub fn sex(s: Sex) -> &'static str {
    match s {
        Sex::Man => "man",
        Sex::Woman => "woman",
    }
}

pub fn marital(m: Marital) -> &'static str {
    match m {
        Marital::Married => "married",
        Marital::Divorced => "divorced",
        Marital::Widowed => "widowed",
        Marital::NeverMarried => "single and has never been married",
    }
}

pub fn education(e: Education) -> &'static str {
    match e {
        Education::Grade0To8 => "grade 8 or lower, without a high school diploma",
        Education::Grade9To12 => "some high school (grades 9 to 12), without a diploma",
        Education::HighSchool => "a high school diploma",
        Education::SomeCollege => "some college, without a college degree",
        Education::College => "a college degree",
        Education::Graduate => "a graduate degree",
    }
}

pub fn region(r: Region) -> &'static str {
    match r {
        Region::Western => "the western United States",
        Region::NorthCentral => "the north central United States",
        Region::Northeastern => "the northeastern United States",
        Region::Southern => "the southern United States",
    }
}

pub fn political_affiliation(p: PoliticalAffiliation) -> &'static str {
    match p {
        PoliticalAffiliation::Republican => "a Republican",
        PoliticalAffiliation::Democrat => "a Democrat",
        PoliticalAffiliation::IndependentLeanRepublican => "an independent who leans Republican",
        PoliticalAffiliation::IndependentLeanDemocrat => "an independent who leans Democrat",
        PoliticalAffiliation::IndependentNoPreference => "an independent with no party preference",
    }
}

pub fn income(i: IncomeBand) -> &'static str {
    match i {
        IncomeBand::VeryLow => "a very low income",
        IncomeBand::Low => "a low income",
        IncomeBand::Middle => "a middle income",
        IncomeBand::High => "a high income",
        IncomeBand::VeryHigh => "a very high income",
    }
}

/// "go up by about 3.5 percent", "go down by about 1 percent" or "stay
/// about the same".
pub fn prior_inflation(x: f64) -> String {
    let magnitude = format!("{}", (x.abs() * 100.0).round() / 100.0);
    if x > 0.0 {
        format!("go up by about {magnitude} percent")
    } else if x < 0.0 {
        format!("go down by about {magnitude} percent")
    } else {
        "stay about the same".to_string()
    }
}

pub fn prior_unemployment(u: UnemploymentPrior) -> String {
    match u {
        UnemploymentPrior::Direction(Direction::Increase) => "more unemployment than now".into(),
        UnemploymentPrior::Direction(Direction::Same) => "about the same level of unemployment as now".into(),
        UnemploymentPrior::Direction(Direction::Decrease) => "less unemployment than now".into(),
        UnemploymentPrior::Percent(p) => {
            format!("the unemployment rate to be about {} percent", (p * 100.0).round() / 100.0)
        }
    }
}

pub fn prior_rates(r: Option<Direction>) -> &'static str {
    match r {
        Some(Direction::Increase) => "interest rates to go up",
        Some(Direction::Same) => "interest rates to stay about the same",
        Some(Direction::Decrease) => "interest rates to go down",
        None => "nothing in particular about interest rates",
    }
}

pub fn confidence(c: Confidence) -> &'static str {
    match c {
        Confidence::ExtremelyWeak => "extremely weak",
        Confidence::Weak => "weak",
        Confidence::Moderate => "moderate",
        Confidence::Strong => "strong",
        Confidence::ExtremelyStrong => "extremely strong",
    }
}

pub fn trend(t: Trend) -> &'static str {
    match t {
        Trend::ContinuouslyDecrease => "continuously decrease",
        Trend::StayConstant => "stay constant",
        Trend::ContinuouslyIncrease => "continuously increase",
    }
}

pub fn knowledge_source(k: KnowledgeType) -> &'static str {
    match k {
        KnowledgeType::Fomc => "FOMC documents",
        KnowledgeType::News => "economic news coverage",
        KnowledgeType::Wikipedia => "Wikipedia articles",
    }
}

pub fn household_pcm(p: &HouseholdProfile) -> Values {
    BTreeMap::from([
        ("AGE", p.age.to_string()),
        ("SEX", sex(p.sex).to_string()),
        ("MARITAL", marital(p.marital).to_string()),
        ("EDUCATION", education(p.education).to_string()),
        ("REGION", region(p.region).to_string()),
        ("POLITICAL_AFFILIATION", political_affiliation(p.political_affiliation).to_string()),
        ("INCOME", income(p.income_band).to_string()),
    ])
}

pub fn household_pepm(p: &HouseholdProfile) -> Values {
    BTreeMap::from([
        ("PRIOR_INFLATION", prior_inflation(p.prior_inflation_expectation)),
        ("PRIOR_UNEMPLOYMENT", prior_unemployment(p.prior_unemployment_expectation)),
        ("PRIOR_RATES", prior_rates(p.prior_rates_expectation).to_string()),
    ])
}

pub fn expert_initialization(p: &ExpertProfile) -> Values {
    BTreeMap::from([("CONF", confidence(p.confidence).to_string())])
}

pub fn expert_pepm(p: &ExpertProfile) -> Values {
    BTreeMap::from([
        ("PCE_TREND", trend(p.pce_trend).to_string()),
        ("UNEMPLOYMENT_TREND", trend(p.unemployment_trend).to_string()),
    ])
}

pub fn expert_kam(p: &ExpertProfile, knowledge: &str) -> Values {
    BTreeMap::from([
        ("KNOWLEDGE_SOURCE", knowledge_source(p.knowledge_type).to_string()),
        ("KNOWLEDGE", knowledge.to_string()),
    ])
}
