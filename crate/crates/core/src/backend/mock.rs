//! Deterministic offline backend.
//!
//! Every reply is a pure function of the backend seed and the request hash.
//! The mock recognises the prompt assets shipped with the crate: the first
//! line of the final user message may carry a `[task:NAME]` marker (query
//! generation, summaries, response-type coding, mechanism coding); a message
//! containing the questionnaire answer form gets a well-formed forecast.
//! Anything else receives a short canned reply.

use regex::Regex;
use std::sync::OnceLock;

use super::{BackendError, ChatBackend, ChatRequest, ChatResponse, Role, Usage};
use crate::rng::unit_hash;

pub struct MockBackend {
    seed: u64,
    id: String,
}

impl MockBackend {
    pub fn new(seed: u64) -> Self {
        Self { seed, id: "mock".into() }
    }

    fn draw(&self, hash: &str, label: &str) -> f64 {
        unit_hash(self.seed, &format!("{hash}/{label}"))
    }

    fn pick<'a>(&self, hash: &str, label: &str, pool: &[&'a str]) -> &'a str {
        pool[((self.draw(hash, label) * pool.len() as f64) as usize).min(pool.len() - 1)]
    }
}

impl ChatBackend for MockBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        let hash = request.hash();
        let last = request.last_user();
        let task = last.lines().next().and_then(|l| l.trim().strip_prefix("[task:")).and_then(|l| l.strip_suffix(']'));
        let (text, reasoning) = match task {
            Some("queries") => (self.queries(&hash, last), None),
            Some("summary") => (summary(last), None),
            Some("response-types") => (response_types(field(last, "Response:")), None),
            Some("mechanisms") => (mechanisms(field(last, "Response:")), None),
            _ if last.contains("Inflation rate (") => self.forecast(&hash, request),
            _ => ("Understood.".to_string(), None),
        };
        let prompt_tokens = request.messages.iter().map(|m| m.content.split_whitespace().count() as u64).sum();
        let completion_tokens = text.split_whitespace().count() as u64;
        Ok(ChatResponse {
            text,
            reasoning_content: reasoning,
            usage: Usage { prompt_tokens, completion_tokens },
            backend_id: self.id.clone(),
        })
    }

    fn id(&self) -> &str {
        &self.id
    }
}

/// Text following `label` up to the next blank line.
fn field<'a>(text: &'a str, label: &str) -> &'a str {
    let Some(start) = text.find(label) else { return "" };
    let rest = &text[start + label.len()..];
    rest.split("\n\n").next().unwrap_or("").trim()
}

fn captures<'a>(re: &'static OnceLock<Regex>, pattern: &str, text: &'a str) -> Option<&'a str> {
    re.get_or_init(|| Regex::new(pattern).expect("valid pattern")).captures(text).and_then(|c| c.get(1)).map(|m| m.as_str())
}

impl MockBackend {
    fn queries(&self, hash: &str, prompt: &str) -> String {
        static TOPIC: OnceLock<Regex> = OnceLock::new();
        static COUNT: OnceLock<Regex> = OnceLock::new();
        let topic = captures(&TOPIC, r"(?m)^Topic:\s*(.+?)\s*$", prompt).unwrap_or("the economy").to_lowercase();
        let count: usize = captures(&COUNT, r"Write (\d+) search queries", prompt).and_then(|n| n.parse().ok()).unwrap_or(5);
        let forms = [
            "{} shock effect on inflation",
            "{} and the unemployment outlook",
            "how {} changes pass through to consumer prices",
            "labor market response to {} changes",
            "historical episodes of {} shocks",
            "firms costs and {}",
            "household spending response to {}",
            "monetary policy reaction to {}",
        ];
        let offset = (self.draw(hash, "query-offset") * forms.len() as f64) as usize;
        (0..count.max(1))
            .map(|i| {
                let q = forms[(offset + i) % forms.len()].replace("{}", &topic);
                if i < forms.len() {
                    q
                } else {
                    format!("{q} {}", i / forms.len() + 1)
                }
            })
            .collect::<Vec<_>>()
            .join("\n")
    }

    fn forecast(&self, hash: &str, request: &ChatRequest) -> (String, Option<String>) {
        let last = request.last_user();
        let q2 = |x: f64| (x * 100.0).round() / 100.0;
        if last.contains("Inflation rate (baseline)") {
            let pi = q2(2.0 + 2.0 * self.draw(hash, "pi"));
            let u = q2(3.5 + 1.5 * self.draw(hash, "u"));
            return (
                format!("Inflation rate (baseline): {pi:.2}%\nUnemployment rate (baseline): {u:.2}%"),
                None,
            );
        }

        let (base_pi, base_u) = previous_baseline(request)
            .unwrap_or_else(|| (q2(2.0 + 2.0 * self.draw(hash, "pi")), q2(3.5 + 1.5 * self.draw(hash, "u"))));
        let shock = Shock::detect(last);
        let (p_pi, p_u) = shock.rise_probabilities();
        let sign = if shock.rise { 1.0 } else { -1.0 };
        let delta = |label: &str, p_up: f64| {
            if self.draw(hash, &format!("{label}-zero")) < 0.12 {
                return 0.0;
            }
            let up = self.draw(hash, &format!("{label}-dir")) < p_up;
            let m = 0.05 + 1.2 * self.draw(hash, &format!("{label}-mag")).powi(2);
            sign * if up { m } else { -m }
        };
        let pi = q2((base_pi + delta("pi", p_pi)).clamp(-2.0, 8.0));
        let u = q2((base_u + delta("u", p_u)).clamp(0.0, 10.0));
        let pool = shock.considerations();
        let first = self.pick(hash, "c1", pool);
        let mut second = self.pick(hash, "c2", pool);
        if second == first {
            second = pool[(pool.iter().position(|s| *s == first).unwrap_or(0) + 1) % pool.len()];
        }
        let mut considerations = format!("{first} {second}");
        if self.draw(hash, "guess") < 0.15 {
            considerations.push_str(" Honestly, this is partly a guess.");
        }
        let reasoning = format!(
            "{} {} {}",
            self.pick(hash, "r1", REASONING_OPENERS),
            second,
            self.pick(hash, "r2", REASONING_CLOSERS)
        );
        (
            format!(
                "Inflation rate (alternative): {pi:.2}%\nUnemployment rate (alternative): {u:.2}%\nMain considerations (alternative): {considerations}"
            ),
            Some(reasoning),
        )
    }
}

/// Numbers from the most recent assistant baseline answer, if any.
fn previous_baseline(request: &ChatRequest) -> Option<(f64, f64)> {
    static PI: OnceLock<Regex> = OnceLock::new();
    static U: OnceLock<Regex> = OnceLock::new();
    let answer = request.messages.iter().rev().find(|m| m.role == Role::Assistant)?;
    let pi = captures(&PI, r"Inflation rate \(baseline\):\s*(-?\d+(?:\.\d+)?)", &answer.content)?.parse().ok()?;
    let u = captures(&U, r"Unemployment rate \(baseline\):\s*(-?\d+(?:\.\d+)?)", &answer.content)?.parse().ok()?;
    Some((pi, u))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Topic {
    Oil,
    Spending,
    Rate,
    Tax,
    Other,
}

struct Shock {
    topic: Topic,
    rise: bool,
}

impl Shock {
    fn detect(text: &str) -> Self {
        let lower = text.to_lowercase();
        let topic = if lower.contains("crude oil") || lower.contains("oil price") {
            Topic::Oil
        } else if lower.contains("government spending grows") || lower.contains("spending program") {
            Topic::Spending
        } else if lower.contains("federal funds") {
            Topic::Rate
        } else if lower.contains("income tax") {
            Topic::Tax
        } else {
            Topic::Other
        };
        let count = |words: &[&str]| words.iter().map(|w| lower.matches(w).count()).sum::<usize>();
        let up = count(&["rises", "higher", "larger extent", "raising", "more in taxes", "increase"]);
        let down = count(&["falls", "lower", "smaller extent", "reducing", "less in taxes", "cut"]);
        Self { topic, rise: up >= down }
    }

    /// Probability that inflation and unemployment move up under the rise
    /// version of the shock.
    fn rise_probabilities(&self) -> (f64, f64) {
        match self.topic {
            Topic::Oil => (0.85, 0.55),
            Topic::Spending => (0.65, 0.3),
            Topic::Rate => (0.35, 0.65),
            Topic::Tax => (0.55, 0.6),
            Topic::Other => (0.5, 0.5),
        }
    }

    fn considerations(&self) -> &'static [&'static str] {
        match (self.topic, self.rise) {
            (Topic::Oil, true) => &[
                "Higher oil prices raise costs for firms, and they pass these costs on to consumers.",
                "Households have less money left after paying for fuel, so they buy fewer other goods and demand falls.",
                "Some firms may lay off workers as sales slow down.",
                "Transportation costs rise across the economy, which pushes up prices of many goods.",
                "The Fed may respond with tighter monetary policy to keep inflation in check.",
                "Prices went up like this in the 1970s when oil became expensive.",
            ],
            (Topic::Oil, false) => &[
                "Lower oil prices reduce costs for firms, so prices of many goods fall.",
                "Households save money on fuel and buy more other goods, so demand rises.",
                "Cheaper energy lets firms hire more workers.",
                "Transportation costs fall, which lowers prices across the economy.",
                "Oil producers may cut investment and jobs in the energy sector.",
            ],
            (Topic::Spending, true) => &[
                "More government spending raises demand for goods and services.",
                "Defense contractors will hire more workers, so unemployment falls.",
                "Government spending crowds out other demand as interest rates rise.",
                "Higher demand lets firms raise prices, so inflation goes up.",
                "The extra spending is temporary, so the effect should be small.",
            ],
            (Topic::Spending, false) => &[
                "Less government spending lowers demand for goods and services.",
                "Defense contractors may lay off workers, so unemployment rises.",
                "Lower demand forces firms to cut prices, so inflation falls.",
                "The cut is temporary, so the effect should be small.",
                "Private investment may rise as the government borrows less.",
            ],
            (Topic::Rate, true) => &[
                "Firms face higher borrowing costs, so they invest less.",
                "Households borrow less and buy fewer homes and cars, so demand falls.",
                "Lower demand leads firms to lay off workers.",
                "The Fed is tightening monetary policy to bring inflation down.",
                "Higher interest costs on loans may be passed on to customers, so prices rise.",
            ],
            (Topic::Rate, false) => &[
                "Firms face lower borrowing costs, so they invest more.",
                "Cheaper loans encourage households to buy more, so demand rises.",
                "Stronger demand leads firms to hire more workers.",
                "The Fed is easing monetary policy to support the economy.",
                "Lower rates can push up prices as spending grows.",
            ],
            (Topic::Tax, true) => &[
                "Higher taxes leave households with less income, so they buy less and demand falls.",
                "Firms pass higher tax costs on to customers, so prices rise.",
                "Weaker sales lead firms to lay off workers.",
                "Consumers cut back on purchases of non-essential goods.",
                "The tax increase is temporary, so the effect should be modest.",
            ],
            (Topic::Tax, false) => &[
                "Lower taxes leave households with more income, so they buy more and demand rises.",
                "Higher demand lets firms raise prices.",
                "Firms hire more workers as sales grow.",
                "Consumers increase purchases of non-essential goods.",
                "The tax cut is temporary, so the effect should be modest.",
            ],
            (Topic::Other, _) => &[
                "The shock changes costs for firms and prices respond.",
                "Household demand adjusts to the new situation.",
                "Firms adjust hiring as sales change.",
                "Monetary policy may respond to the shock.",
            ],
        }
    }
}

const REASONING_OPENERS: &[&str] = &[
    "Let me think about how this shock moves through the economy.",
    "First I consider the direct effect on prices.",
    "The scenario is hypothetical, so I take its facts as given.",
    "I start from my baseline forecast and adjust it.",
];

const REASONING_CLOSERS: &[&str] = &[
    "Overall the effect on inflation dominates.",
    "The labor market reacts with a lag.",
    "I keep the adjustment moderate because the shock is temporary.",
    "Policy responses could dampen the effect.",
];

fn summary(prompt: &str) -> String {
    static LIMIT: OnceLock<Regex> = OnceLock::new();
    let limit: usize = captures(&LIMIT, r"Word limit:\s*(\d+)", prompt).and_then(|n| n.parse().ok()).unwrap_or(150);
    let passages = prompt.split_once("Passages:\n").map_or("", |(_, p)| p);
    let words: Vec<&str> = passages
        .lines()
        .filter_map(|l| l.strip_prefix("- "))
        .flat_map(str::split_whitespace)
        .take(limit)
        .collect();
    if words.is_empty() {
        "No relevant background was found.".to_string()
    } else {
        words.join(" ")
    }
}

fn response_types(response: &str) -> String {
    let lower = response.to_lowercase();
    let has = |words: &[&str]| words.iter().any(|w| lower.contains(w));
    let mut categories = Vec::new();
    if has(&[
        "cost", "demand", "buy", "purchas", "spend", "invest", "consum", "lay off", "layoff", "hire", "job", "wage",
        "borrow", "crowd", "supply", "income",
    ]) {
        categories.push("Mechanism");
    }
    if has(&["model", "theory", "phillips curve", "textbook"]) {
        categories.push("Model");
    }
    if has(&["guess", "not sure", "uncertain", "no idea"]) {
        categories.push("Guess");
    }
    if has(&["should", "politic", "democrat", "republican"]) {
        categories.push("Politics");
    }
    if has(&["1970s", "in the past", "historical", "history", "typically", "usually"]) {
        categories.push("Historical");
    }
    if has(&["does not make sense", "unrealistic", "would never happen"]) {
        categories.push("Misunderstanding");
    }
    if has(&["i predict", "my forecast is", "inflation rate will be"]) {
        categories.push("Restates prediction");
    }
    if has(&["in response to", "because the economy"]) {
        categories.push("Endogenous shock");
    }
    if categories.is_empty() {
        categories.push("Other");
    }
    format!("Categories: {}", categories.join(", "))
}

fn mechanisms(response: &str) -> String {
    let mut codes: Vec<String> = Vec::new();
    for sentence in response.split(['.', '!', '?']) {
        let s = sentence.to_lowercase();
        if s.trim().is_empty() {
            continue;
        }
        let dir = direction_of(&s);
        let mut push = |code: String| {
            if !codes.contains(&code) {
                codes.push(code);
            }
        };
        if s.contains("borrowing cost") || s.contains("interest cost") {
            push(format!("costs borrowing firms {dir}"));
        } else if s.contains("cost") && (s.contains("firm") || s.contains("transport") || s.contains("tax")) {
            push(format!("costs firms {dir}"));
        }
        if s.contains("crowd") {
            push("crowding out +".to_string());
        }
        if s.contains("oil dependen") || s.contains("dependence on oil") {
            push(format!("oil dependency {dir}"));
        }
        if (s.contains("demand") && !s.contains("crowd")) || s.contains("buy") || s.contains("purchas") {
            push(format!("demand households {dir}"));
        }
        if s.contains("lay off") || s.contains("layoff") {
            push("labor demand -".to_string());
        } else if s.contains("hire") || s.contains("hiring") {
            push("labor demand +".to_string());
        }
    }
    if codes.is_empty() {
        "Codes:\nnone".to_string()
    } else {
        format!("Codes:\n{}", codes.join("\n"))
    }
}

/// "+", "-" or "" from the first directional word in a lower-cased sentence.
fn direction_of(s: &str) -> &'static str {
    const UP: &[&str] = &["higher", "rise", "raise", "increase", "more", "boost", "grow", "up"];
    const DOWN: &[&str] = &["lower", "fall", "less", "fewer", "cut", "reduce", "decline", "weaker", "drop", "cheaper"];
    let first = |words: &[&str]| {
        s.split(|c: char| !c.is_alphanumeric())
            .position(|tok| words.iter().any(|w| tok.starts_with(w)))
    };
    match (first(UP), first(DOWN)) {
        (Some(u), Some(d)) => {
            if u < d {
                "+"
            } else {
                "-"
            }
        }
        (Some(_), None) => "+",
        (None, Some(_)) => "-",
        (None, None) => "",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::ChatMessage;
    use crate::{Scenario, VignetteId, VignetteSet};

    fn ask(backend: &MockBackend, text: &str) -> ChatResponse {
        backend.complete(&ChatRequest::new("m", vec![ChatMessage::user(text)])).unwrap()
    }

    fn number(text: &str, label: &str) -> f64 {
        let line = text.lines().find(|l| l.starts_with(label)).unwrap();
        line.rsplit(' ').next().unwrap().trim_end_matches('%').parse().unwrap()
    }

    #[test]
    fn same_request_same_response() {
        let b = MockBackend::new(4);
        assert_eq!(ask(&b, "hello"), ask(&b, "hello"));
        assert_eq!(ask(&b, "hello").text, "Understood.");
    }

    #[test]
    fn forecasts_respect_bounds_for_every_vignette() {
        let set = VignetteSet::bundled();
        for seed in 0..20 {
            let b = MockBackend::new(seed);
            for v in set.iter() {
                for scenario in [Scenario::Baseline, Scenario::Rise, Scenario::Fall] {
                    let reply = ask(&b, &v.question_text(scenario, true)).text;
                    let tag = scenario.answer_tag();
                    let pi = number(&reply, &format!("Inflation rate ({tag})"));
                    let u = number(&reply, &format!("Unemployment rate ({tag})"));
                    assert!((-2.0..=8.0).contains(&pi) && (0.0..=10.0).contains(&u), "{reply}");
                    assert_eq!(scenario.is_shock(), reply.contains("Main considerations (alternative):"));
                }
            }
        }
    }

    #[test]
    fn seed_changes_numbers() {
        let q = VignetteSet::bundled().get(&VignetteId::new(VignetteId::OIL_PRICE)).unwrap().question_text(Scenario::Rise, true);
        let distinct: std::collections::BTreeSet<String> = (0..10).map(|s| ask(&MockBackend::new(s), &q).text).collect();
        assert!(distinct.len() > 1);
    }

    #[test]
    fn shock_detection() {
        let set = VignetteSet::bundled();
        for v in set.iter() {
            assert!(Shock::detect(v.scenario_text(Scenario::Rise)).rise, "{}", v.id);
            assert!(!Shock::detect(v.scenario_text(Scenario::Fall)).rise, "{}", v.id);
            assert_ne!(Shock::detect(v.scenario_text(Scenario::Rise)).topic, Topic::Other);
        }
    }

    #[test]
    fn summary_truncates_or_returns_passage() {
        let one = "[task:summary]\nWord limit: 50\nPassages:\n- Oil prices feed into transport costs.";
        assert_eq!(summary(one), "Oil prices feed into transport costs.");
        let long = "[task:summary]\nWord limit: 3\nPassages:\n- a b c\n- d e";
        assert_eq!(summary(long), "a b c");
    }

    #[test]
    fn canned_coding_replies() {
        assert_eq!(response_types("Costs for firms will rise."), "Categories: Mechanism");
        assert_eq!(
            response_types("Demand falls as households buy less, but this is a guess."),
            "Categories: Mechanism, Guess"
        );
        assert_eq!(response_types("No comment."), "Categories: Other");
        assert_eq!(mechanisms("Firms face higher borrowing costs."), "Codes:\ncosts borrowing firms +");
        assert!(mechanisms("Government spending crowds out other demand.").contains("crowding out +"));
        assert_eq!(mechanisms("Nothing much."), "Codes:\nnone");
    }

    #[test]
    fn query_count_follows_prompt() {
        let b = MockBackend::new(1);
        let reply = ask(&b, "[task:queries]\nTopic: Oil price\nWrite 12 search queries for retrieving").text;
        let lines: Vec<&str> = reply.lines().collect();
        assert_eq!(lines.len(), 12);
        let unique: std::collections::BTreeSet<_> = lines.iter().collect();
        assert_eq!(unique.len(), 12);
    }
}
