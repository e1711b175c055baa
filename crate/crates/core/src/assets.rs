//! Default assets compiled into the binary.
//!
//! Paths are relative to the asset root and follow the on-disk layout, so the
//! same loaders accept either these bundled files or a user directory with
//! edited copies.

macro_rules! bundle {
    ($($path:literal),* $(,)?) => {
        &[$(($path, include_str!(concat!("../assets/", $path)))),*]
    };
}

/// Every bundled asset as `(relative path, contents)`.
pub const FILES: &[(&str, &str)] = bundle![
    "templates/household/initialization.txt",
    "templates/household/pcm.txt",
    "templates/household/pepm.txt",
    "templates/household/questionnaire.txt",
    "templates/expert/initialization.txt",
    "templates/expert/pepm.txt",
    "templates/expert/kam_knowledge.txt",
    "templates/expert/questionnaire.txt",
    "vignettes/oil_price/introduction.txt",
    "vignettes/oil_price/baseline.txt",
    "vignettes/oil_price/rise.txt",
    "vignettes/oil_price/fall.txt",
    "vignettes/government_spending/introduction.txt",
    "vignettes/government_spending/baseline.txt",
    "vignettes/government_spending/rise.txt",
    "vignettes/government_spending/fall.txt",
    "vignettes/federal_funds_rate/introduction.txt",
    "vignettes/federal_funds_rate/baseline.txt",
    "vignettes/federal_funds_rate/rise.txt",
    "vignettes/federal_funds_rate/fall.txt",
    "vignettes/income_taxes/introduction.txt",
    "vignettes/income_taxes/baseline.txt",
    "vignettes/income_taxes/rise.txt",
    "vignettes/income_taxes/fall.txt",
    "knowledge/queries.txt",
    "knowledge/summary.txt",
    "coding/response_types.txt",
    "coding/mechanisms_household.txt",
    "coding/mechanisms_expert.txt",
    "word_groups.toml",
];

/// Contents of one bundled asset.
pub fn get(path: &str) -> Option<&'static str> {
    FILES.iter().find(|(p, _)| *p == path).map(|(_, body)| *body)
}

/// Bundled assets under a directory prefix, with the prefix stripped.
pub fn under(prefix: &str) -> impl Iterator<Item = (&'static str, &'static str)> + '_ {
    let prefix = prefix.trim_end_matches('/');
    FILES.iter().filter_map(move |(p, body)| {
        p.strip_prefix(prefix)
            .and_then(|rest| rest.strip_prefix('/'))
            .map(|rest| (rest, *body))
    })
}

/// Writes every bundled asset below `root`, creating directories.
pub fn export(root: &std::path::Path) -> std::io::Result<()> {
    for (path, body) in FILES {
        let target = root.join(path);
        if let Some(parent) = target.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(target, body)?;
    }
    Ok(())
}
