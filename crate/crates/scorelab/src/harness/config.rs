//! Key-value config files.
//!
//! The format is one `key = value` pair per line; `#` starts a comment;
//! blank lines are ignored. Values are scalars, space-separated numeric
//! lists, or strings. Indexed keys (`mean.0`, `mean.1`, ...) encode rows.
//!
//! Space keys:
//!
//! ```text
//! d = 2              # dimension (optional when c is an explicit list)
//! c = 1.0 0.5        # spectrum of C: list, or scalar broadcast over d
//! a = 1.0 0.5        # spectrum of A: defaults to c
//! ```
//!
//! Target keys, by family:
//!
//! ```text
//! family = gaussian_mixture
//! weights = 0.5 0.5
//! mean.0 = -1.0      # one row per component
//! mean.1 = 1.0
//! var.0 = 0.25
//! var.1 = 0.25
//!
//! family = mollified_point_cloud
//! atom.0 = -1.0
//! atom.1 = 1.0
//! weights = 0.5 0.5  # optional, uniform otherwise
//! sigma2 = 1.0
//!
//! family = linear_gaussian_posterior
//! g.0 = 1.0 0.0      # observation rows
//! g.1 = 0.0 2.0
//! noise = 0.5 0.5    # noise spectrum Sigma
//! y = 1.0 -1.0
//!
//! family = product_symmetric_mixture
//! prod_atom = 1.0 0.7    # defaults to sqrt(c) (the trace form)
//! prod_var = 1.0 0.5     # defaults to c
//!
//! family = stationary    # N(0, C)
//! ```

use crate::spectral::ModelSpace;
use crate::targets::{
    GaussianMixture, LinearGaussianPosterior, MollifiedPointCloud, ProductSymmetricMixture,
    TargetModel,
};
use crate::util::content_hash;
use crate::{Error, Result};
use std::collections::BTreeMap;
use std::path::Path;

/// Parsed key-value config with access to the raw text for hashing.
#[derive(Debug, Clone)]
pub struct KvMap {
    map: BTreeMap<String, String>,
    raw: String,
}

impl KvMap {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = match line.find('#') {
                Some(pos) => &line[..pos],
                None => line,
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if map.insert(key.clone(), value).is_some() {
                return Err(Error::Config(format!("duplicate key `{key}`")));
            }
        }
        Ok(KvMap { map, raw: text.to_string() })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::Config(format!("missing key `{key}`")))
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        self.require(key)?
            .parse()
            .map_err(|_| Error::Config(format!("key `{key}` is not a number")))
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.get(key) {
            Some(_) => self.f64(key),
            None => Ok(default),
        }
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("key `{key}` is not a count"))),
        }
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("key `{key}` is not an integer"))),
        }
    }

    pub fn str_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.get(key).unwrap_or(default)
    }

    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>> {
        let raw = self.require(key)?;
        raw.split_whitespace()
            .map(|tok| {
                tok.parse()
                    .map_err(|_| Error::Config(format!("key `{key}`: bad number `{tok}`")))
            })
            .collect()
    }

    pub fn f64_list_or(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.get(key) {
            Some(_) => self.f64_list(key),
            None => Ok(default.to_vec()),
        }
    }

    /// Rows stored under `prefix.0`, `prefix.1`, ... (dense from zero).
    pub fn rows(&self, prefix: &str) -> Result<Vec<Vec<f64>>> {
        let mut rows = Vec::new();
        loop {
            let key = format!("{prefix}.{}", rows.len());
            match self.get(&key) {
                None => break,
                Some(_) => rows.push(self.f64_list(&key)?),
            }
        }
        Ok(rows)
    }

    /// Git-style content hash of the raw config text.
    pub fn content_hash(&self) -> String {
        content_hash(&self.raw)
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }
}

/// Spectrum entry: scalar broadcast over d, or explicit list.
fn spectrum(kv: &KvMap, key: &str, d: Option<usize>) -> Result<Option<Vec<f64>>> {
    match kv.get(key) {
        None => Ok(None),
        Some(_) => {
            let list = kv.f64_list(key)?;
            match (list.len(), d) {
                (1, Some(d)) => Ok(Some(vec![list[0]; d])),
                _ => Ok(Some(list)),
            }
        }
    }
}

/// Build the model space from config keys.
pub fn load_space(kv: &KvMap) -> Result<ModelSpace> {
    let d_hint = match kv.get("d") {
        None => None,
        Some(v) => Some(
            v.parse::<usize>()
                .map_err(|_| Error::Config("key `d` is not a count".into()))?,
        ),
    };
    let c = spectrum(kv, "c", d_hint)?
        .ok_or_else(|| Error::Config("missing key `c` (spectrum of C)".into()))?;
    let a = spectrum(kv, "a", Some(c.len()))?.unwrap_or_else(|| c.clone());
    if let Some(d) = d_hint {
        if d != c.len() {
            return Err(Error::Config(format!(
                "d = {d} disagrees with spectrum length {}",
                c.len()
            )));
        }
    }
    ModelSpace::new(c, a)
}

/// Build the target from config keys (needs the space for posteriors and
/// product defaults).
pub fn load_target(kv: &KvMap, space: &ModelSpace) -> Result<TargetModel> {
    match kv.require("family")? {
        "stationary" => Ok(TargetModel::stationary(space)),
        "gaussian_mixture" => {
            let means = kv.rows("mean")?;
            if means.is_empty() {
                return Err(Error::Config("gaussian_mixture needs mean.0, ...".into()));
            }
            let vars = kv.rows("var")?;
            let weights = kv.f64_list_or(
                "weights",
                &vec![1.0 / means.len() as f64; means.len()],
            )?;
            Ok(TargetModel::GaussianMixture(GaussianMixture::new(weights, means, vars)?))
        }
        "mollified_point_cloud" => {
            let atoms = kv.rows("atom")?;
            if atoms.is_empty() {
                return Err(Error::Config("mollified_point_cloud needs atom.0, ...".into()));
            }
            let sigma2 = kv.f64("sigma2")?;
            let cloud = match kv.get("weights") {
                Some(_) => MollifiedPointCloud::new(atoms, kv.f64_list("weights")?, sigma2)?,
                None => MollifiedPointCloud::uniform(atoms, sigma2)?,
            };
            Ok(TargetModel::MollifiedPointCloud(cloud))
        }
        "linear_gaussian_posterior" => {
            let g_rows = kv.rows("g")?;
            if g_rows.is_empty() {
                return Err(Error::Config("linear_gaussian_posterior needs g.0, ...".into()));
            }
            let noise = kv.f64_list("noise")?;
            let y = kv.f64_list("y")?;
            Ok(TargetModel::LinearGaussianPosterior(LinearGaussianPosterior::new(
                g_rows, noise, y, space,
            )?))
        }
        "product_symmetric_mixture" => {
            let default_atom: Vec<f64> = space.c().iter().map(|c| c.sqrt()).collect();
            let atom = kv.f64_list_or("prod_atom", &default_atom)?;
            let var = kv.f64_list_or("prod_var", space.c())?;
            Ok(TargetModel::ProductSymmetricMixture(ProductSymmetricMixture::new(atom, var)?))
        }
        other => Err(Error::Config(format!("unknown target family `{other}`"))),
    }
}

/// Convenience: space + target in one call.
pub fn load_space_and_target(kv: &KvMap) -> Result<(ModelSpace, TargetModel)> {
    let space = load_space(kv)?;
    let target = load_target(kv, &space)?;
    Ok((space, target))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_mixture_config() {
        let text = "\
# the bimodal verification target
d = 1
c = 1.0
a = 1.0
family = gaussian_mixture
weights = 0.5 0.5
mean.0 = -1.0
mean.1 = 1.0
var.0 = 0.25
var.1 = 0.25
";
        let kv = KvMap::parse(text).unwrap();
        let (space, target) = load_space_and_target(&kv).unwrap();
        assert_eq!(space.dim(), 1);
        assert_eq!(target.dim(), 1);
        assert!((target.second_moment_exact() - 1.25).abs() < 1e-14);
    }

    #[test]
    fn scalar_spectrum_broadcasts_over_d() {
        let kv = KvMap::parse("d = 4\nc = 1.0\nfamily = stationary\n").unwrap();
        let (space, _) = load_space_and_target(&kv).unwrap();
        assert_eq!(space.dim(), 4);
        assert!(space.tail_equals_base());
    }

    #[test]
    fn posterior_config_round_trip() {
        let text = "\
d = 2
c = 1.0 0.5
family = linear_gaussian_posterior
g.0 = 1.0 0.0
g.1 = 0.0 2.0
noise = 0.5 0.5
y = 1.0 -1.0
";
        let kv = KvMap::parse(text).unwrap();
        let (_, target) = load_space_and_target(&kv).unwrap();
        assert!(matches!(target, TargetModel::LinearGaussianPosterior(_)));
    }

    #[test]
    fn rejects_malformed_lines_and_duplicates() {
        assert!(KvMap::parse("novalue\n").is_err());
        assert!(KvMap::parse("a = 1\na = 2\n").is_err());
    }

    #[test]
    fn hash_is_stable_and_content_sensitive() {
        let a = KvMap::parse("x = 1\n").unwrap();
        let b = KvMap::parse("x = 1\n").unwrap();
        let c = KvMap::parse("x = 2\n").unwrap();
        assert_eq!(a.content_hash(), b.content_hash());
        assert_ne!(a.content_hash(), c.content_hash());
    }
}
