//! Hierarchical location comparison backed by a small embedded gazetteer.
//!
//! Values are split into components, most specific first
//! (`premises / sub-city / city / country`). Each component expands to itself
//! plus its gazetteer ancestors, so `Los Angeles` implies `California` and
//! `United States`.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::sync::OnceLock;

use super::Score;

/// `place|parent` lines; countries have no parent.
const GAZETTEER: &str = "\
united states|
canada|
mexico|
brazil|
argentina|
united kingdom|
ireland|
france|
germany|
spain|
portugal|
italy|
netherlands|
belgium|
switzerland|
austria|
poland|
czech republic|
hungary|
romania|
greece|
turkey|
russia|
ukraine|
sweden|
norway|
denmark|
finland|
india|
china|
japan|
south korea|
australia|
new zealand|
south africa|
nigeria|
egypt|
california|united states
texas|united states
new york state|united states
florida|united states
illinois|united states
washington state|united states
massachusetts|united states
england|united kingdom
scotland|united kingdom
wales|united kingdom
ontario|canada
quebec|canada
british columbia|canada
bavaria|germany
catalonia|spain
new south wales|australia
victoria|australia
los angeles|california
san francisco|california
san diego|california
san jose|california
houston|texas
austin|texas
dallas|texas
new york city|new york state
chicago|illinois
seattle|washington state
boston|massachusetts
miami|florida
london|england
manchester|england
birmingham|england
edinburgh|scotland
glasgow|scotland
cardiff|wales
dublin|ireland
paris|france
lyon|france
marseille|france
berlin|germany
munich|bavaria
hamburg|germany
madrid|spain
barcelona|catalonia
lisbon|portugal
rome|italy
milan|italy
amsterdam|netherlands
brussels|belgium
zurich|switzerland
geneva|switzerland
vienna|austria
warsaw|poland
krakow|poland
prague|czech republic
budapest|hungary
bucharest|romania
athens|greece
istanbul|turkey
ankara|turkey
moscow|russia
kyiv|ukraine
stockholm|sweden
oslo|norway
copenhagen|denmark
helsinki|finland
toronto|ontario
montreal|quebec
vancouver|british columbia
mumbai|india
delhi|india
beijing|china
shanghai|china
tokyo|japan
seoul|south korea
sydney|new south wales
melbourne|victoria
auckland|new zealand
johannesburg|south africa
lagos|nigeria
cairo|egypt
";

const ALIASES: &[(&str, &str)] = &[
    ("usa", "united states"),
    ("us", "united states"),
    ("u.s.", "united states"),
    ("u.s.a.", "united states"),
    ("united states of america", "united states"),
    ("america", "united states"),
    ("uk", "united kingdom"),
    ("u.k.", "united kingdom"),
    ("great britain", "united kingdom"),
    ("britain", "united kingdom"),
    ("turkiye", "turkey"),
    ("türkiye", "turkey"),
    ("republic of turkey", "turkey"),
    ("czechia", "czech republic"),
    ("holland", "netherlands"),
    ("the netherlands", "netherlands"),
    ("korea", "south korea"),
    ("republic of korea", "south korea"),
    ("russian federation", "russia"),
    ("nyc", "new york city"),
    ("new york", "new york city"),
    ("la", "los angeles"),
    ("sf", "san francisco"),
    ("ca", "california"),
    ("tx", "texas"),
    ("kiev", "kyiv"),
    ("cracow", "krakow"),
    ("kraków", "krakow"),
    ("munchen", "munich"),
    ("münchen", "munich"),
    ("wien", "vienna"),
    ("roma", "rome"),
    ("lisboa", "lisbon"),
    ("warszawa", "warsaw"),
    ("praha", "prague"),
];

struct Gazetteer {
    parent: HashMap<&'static str, &'static str>,
    countries: HashSet<&'static str>,
    aliases: HashMap<&'static str, &'static str>,
}

fn gazetteer() -> &'static Gazetteer {
    static G: OnceLock<Gazetteer> = OnceLock::new();
    G.get_or_init(|| {
        let mut parent = HashMap::new();
        let mut countries = HashSet::new();
        for line in GAZETTEER.lines().filter(|l| !l.is_empty()) {
            let (place, up) = line.split_once('|').expect("gazetteer line has a separator");
            if up.is_empty() {
                countries.insert(place);
            } else {
                parent.insert(place, up);
            }
        }
        Gazetteer {
            parent,
            countries,
            aliases: ALIASES.iter().copied().collect(),
        }
    })
}

fn canonical(component: &str) -> String {
    let c = component.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
    let c = c.strip_prefix("the ").map(str::to_string).unwrap_or(c);
    gazetteer().aliases.get(c.as_str()).map(|s| s.to_string()).unwrap_or(c)
}

/// Components, most specific first. A single comma-separated component is
/// split on commas (`Austin, Texas`).
pub fn components(value: &str) -> Vec<String> {
    let parts: Vec<&str> = value.split('/').map(str::trim).filter(|s| !s.is_empty()).collect();
    let parts: Vec<&str> = if parts.len() == 1 && parts[0].contains(',') {
        parts[0].split(',').map(str::trim).filter(|s| !s.is_empty()).collect()
    } else {
        parts
    };
    parts.into_iter().map(canonical).collect()
}

fn ancestors(place: &str) -> Vec<String> {
    let g = gazetteer();
    let mut out = Vec::new();
    let mut cur = place;
    while let Some(up) = g.parent.get(cur) {
        out.push(up.to_string());
        cur = up;
    }
    out
}

fn expand(components: &[String]) -> BTreeSet<String> {
    components
        .iter()
        .flat_map(|c| std::iter::once(c.clone()).chain(ancestors(c)))
        .collect()
}

fn countries(expanded: &BTreeSet<String>) -> BTreeSet<&str> {
    let g = gazetteer();
    expanded
        .iter()
        .map(String::as_str)
        .filter(|p| g.countries.contains(p))
        .collect()
}

/// Rule verdict for a location pair; `None` means undecided.
#[derive(Debug, Clone, PartialEq)]
pub struct LocationVerdict {
    pub score: Score,
    pub note: Option<String>,
}

/// Compares a ground-truth location with a predicted one.
///
/// * 1.0: same most-specific component, or the prediction is at least as
///   specific and implies the ground truth's most specific component.
/// * 1.0 with a depth note: both have four levels and differ only in
///   premises.
/// * 0.5: every predicted component is implied by the ground truth and the
///   prediction is strictly coarser.
/// * otherwise undecided.
///
/// Asymmetric by design: a coarse ground truth with a specific prediction is
/// 1.0, not 0.5.
pub fn compare_location(gt: &str, pred: &str) -> Option<LocationVerdict> {
    let g = components(gt);
    let p = components(pred);
    let (Some(g_leaf), Some(p_leaf)) = (g.first(), p.first()) else {
        return None;
    };
    let g_exp = expand(&g);
    let p_exp = expand(&p);

    // country conflicts are judged on the coarsest component, which is less
    // ambiguous than a leaf such as `Paris`
    let (g_top, p_top) = (expand(&g[g.len() - 1..]), expand(&p[p.len() - 1..]));
    let (gc, pc) = (countries(&g_top), countries(&p_top));
    if !gc.is_empty() && !pc.is_empty() && gc.is_disjoint(&pc) {
        return None;
    }

    if g_leaf == p_leaf || p_exp.contains(g_leaf) {
        return Some(LocationVerdict {
            score: Score::Match,
            note: None,
        });
    }
    if g.len() == 4 && p.len() == 4 && g[1..] == p[1..] {
        return Some(LocationVerdict {
            score: Score::Match,
            note: Some("premises differ; matched at depth 3".into()),
        });
    }
    if p.iter().all(|c| g_exp.contains(c)) {
        return Some(LocationVerdict {
            score: Score::LessPrecise,
            note: Some(format!("prediction `{p_leaf}` is an ancestor of `{g_leaf}`")),
        });
    }
    None
}
