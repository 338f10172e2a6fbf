//! Offline coordinate → country lookup against a bundled coarse outline table.

use std::sync::OnceLock;

use crate::{Error, Result};

/// Country code reported for coordinates outside every outline.
pub const UNRESOLVED: &str = "UNRESOLVED";

const BUNDLED: &str = include_str!("../../data/atlas.tsv");

#[derive(Debug, Clone)]
pub struct Polygon {
    /// `(lon, lat)` vertices; the ring closes implicitly.
    ring: Vec<(f64, f64)>,
    min: (f64, f64),
    max: (f64, f64),
}

impl Polygon {
    pub fn new(ring: Vec<(f64, f64)>) -> Result<Self> {
        if ring.len() < 3 {
            return Err(Error::InvalidArgument("polygon needs at least 3 vertices".into()));
        }
        let mut min = (f64::INFINITY, f64::INFINITY);
        let mut max = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for &(x, y) in &ring {
            min = (min.0.min(x), min.1.min(y));
            max = (max.0.max(x), max.1.max(y));
        }
        Ok(Polygon { ring, min, max })
    }

    pub fn ring(&self) -> &[(f64, f64)] {
        &self.ring
    }

    /// `(min_lon, min_lat, max_lon, max_lat)`
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        (self.min.0, self.min.1, self.max.0, self.max.1)
    }

    /// Even-odd crossing test.
    pub fn contains(&self, lon: f64, lat: f64) -> bool {
        if lon < self.min.0 || lon > self.max.0 || lat < self.min.1 || lat > self.max.1 {
            return false;
        }
        let mut inside = false;
        let mut j = self.ring.len() - 1;
        for i in 0..self.ring.len() {
            let (xi, yi) = self.ring[i];
            let (xj, yj) = self.ring[j];
            if (yi > lat) != (yj > lat) && lon < (xj - xi) * (lat - yi) / (yj - yi) + xi {
                inside = !inside;
            }
            j = i;
        }
        inside
    }
}

#[derive(Debug, Clone)]
pub struct Country {
    pub code: String,
    pub name: String,
    pub polygons: Vec<Polygon>,
}

impl Country {
    pub fn contains(&self, lat: f64, lon: f64) -> bool {
        self.polygons.iter().any(|p| p.contains(lon, lat))
    }
}

#[derive(Debug, Clone, Default)]
pub struct Atlas {
    countries: Vec<Country>,
}

impl Atlas {
    /// Parses `code<TAB>name<TAB>lon,lat lon,lat ...` lines. Blank lines and
    /// `#` comments are ignored; a repeated code adds another polygon.
    pub fn parse(text: &str) -> Result<Atlas> {
        let mut countries: Vec<Country> = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |what: &str| Error::InvalidArgument(format!("atlas line {}: {what}", n + 1));
            let mut cols = line.split('\t');
            let (Some(code), Some(name), Some(ring)) = (cols.next(), cols.next(), cols.next()) else {
                return Err(bad("expected three tab-separated columns"));
            };
            let ring = ring
                .split_whitespace()
                .map(|pair| {
                    let (lon, lat) = pair.split_once(',')?;
                    Some((lon.parse().ok()?, lat.parse().ok()?))
                })
                .collect::<Option<Vec<(f64, f64)>>>()
                .ok_or_else(|| bad("bad vertex"))?;
            let polygon = Polygon::new(ring)?;
            match countries.iter_mut().find(|c| c.code == code) {
                Some(c) => c.polygons.push(polygon),
                None => countries.push(Country {
                    code: code.to_string(),
                    name: name.to_string(),
                    polygons: vec![polygon],
                }),
            }
        }
        Ok(Atlas { countries })
    }

    pub fn bundled() -> &'static Atlas {
        static ATLAS: OnceLock<Atlas> = OnceLock::new();
        ATLAS.get_or_init(|| Atlas::parse(BUNDLED).expect("bundled atlas parses"))
    }

    pub fn countries(&self) -> &[Country] {
        &self.countries
    }

    pub fn country(&self, code: &str) -> Option<&Country> {
        self.countries.iter().find(|c| c.code == code)
    }

    /// Country containing the point, or [`UNRESOLVED`]. Where outlines
    /// overlap, the first country in table order wins.
    pub fn resolve(&self, lat: f64, lon: f64) -> Result<&str> {
        if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
            return Err(Error::InvalidArgument(format!(
                "coordinates out of range: ({lat}, {lon})"
            )));
        }
        Ok(self
            .countries
            .iter()
            .find(|c| c.contains(lat, lon))
            .map_or(UNRESOLVED, |c| c.code.as_str()))
    }
}

/// Resolves optional coordinates; absent coordinates are [`UNRESOLVED`].
pub fn resolve_country(coords: Option<(f64, f64)>, atlas: &Atlas) -> Result<String> {
    match coords {
        None => Ok(UNRESOLVED.to_string()),
        Some((lat, lon)) => atlas.resolve(lat, lon).map(str::to_string),
    }
}
