//! Effective experiment settings: flags over config file over defaults.

use std::path::Path;

use clap::Args;
use num_bigint::BigUint;
use num_complex::Complex64;
use serde::Deserialize;

use ising_adder::analysis::random_number;
use ising_adder::chain::{encode_addend_register, BasisState};
use ising_adder::map::{realization_rng, MapConfig};

use crate::CliError;

/// Experiment options shared by the subcommands. Every flag may also be set in the config file.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Overrides {
    /// Rotations per detuned pi-pulse (the 2piK condition).
    #[arg(long = "k")]
    pub k: Option<u32>,
    /// Larmor frequency step between neighbouring spins, in units of J.
    #[arg(long)]
    pub delta_omega: Option<f64>,
    /// Number of addend qubits l; the chain has 2l+1 spins.
    #[arg(short = 'l', long)]
    pub addend_bits: Option<usize>,
    /// Classical addend A (decimal), or "sweep" for every A below 2^l.
    #[arg(short = 'a', long)]
    pub addend: Option<String>,
    /// Initial superposition: "B[:re[:im]],..." or "random:M:seed".
    #[arg(long)]
    pub initial: Option<String>,
    /// Pruning coefficient of the map.
    #[arg(long)]
    pub xi_factor: Option<f64>,
    /// Independent map realizations.
    #[arg(long)]
    pub realizations: Option<usize>,
    /// Map random seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl Overrides {
    /// Fills unset fields from `lower`.
    pub fn or(self, lower: Overrides) -> Overrides {
        Overrides {
            k: self.k.or(lower.k),
            delta_omega: self.delta_omega.or(lower.delta_omega),
            addend_bits: self.addend_bits.or(lower.addend_bits),
            addend: self.addend.or(lower.addend),
            initial: self.initial.or(lower.initial),
            xi_factor: self.xi_factor.or(lower.xi_factor),
            realizations: self.realizations.or(lower.realizations),
            seed: self.seed.or(lower.seed),
        }
    }

    pub fn from_file(path: &Path) -> Result<Overrides, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    /// Built-in defaults for the generic subcommands.
    pub fn defaults() -> Overrides {
        let map = MapConfig::default();
        Overrides {
            k: Some(100),
            delta_omega: Some(100.0),
            addend_bits: Some(4),
            addend: Some("6".into()),
            initial: Some("2,5,11,12".into()),
            xi_factor: Some(map.xi_factor),
            realizations: Some(20),
            seed: Some(map.rng_seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Addend {
    Value(BigUint),
    Sweep,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Initial {
    Explicit(Vec<(u64, Option<Complex64>)>),
    Random { useful: usize, seed: u64 },
}

impl Initial {
    pub fn parse(text: &str) -> Result<Initial, CliError> {
        let bad = |why: &str| CliError::Usage(format!("initial state \"{text}\": {why}"));
        if let Some(rest) = text.strip_prefix("random:") {
            let (m, seed) = rest.split_once(':').ok_or_else(|| bad("expected random:M:seed"))?;
            let useful = m.trim().parse().map_err(|_| bad("M is not a count"))?;
            let seed = seed.trim().parse().map_err(|_| bad("seed is not an integer"))?;
            if useful == 0 {
                return Err(bad("M must be positive"));
            }
            return Ok(Initial::Random { useful, seed });
        }
        let mut terms = Vec::new();
        for entry in text.split(',').map(str::trim).filter(|e| !e.is_empty()) {
            let mut parts = entry.split(':');
            let b = parts.next().unwrap_or_default().parse().map_err(|_| bad("register value is not an integer"))?;
            let num = |p: Option<&str>| p.map(|x| x.trim().parse::<f64>().map_err(|_| bad("amplitude is not a number")));
            let re = num(parts.next()).transpose()?;
            let im = num(parts.next()).transpose()?;
            if parts.next().is_some() {
                return Err(bad("expected B[:re[:im]]"));
            }
            terms.push((b, re.map(|re| Complex64::new(re, im.unwrap_or(0.0)))));
        }
        if terms.is_empty() {
            return Err(bad("no terms"));
        }
        let given = terms.iter().filter(|t| t.1.is_some()).count();
        if given != 0 && given != terms.len() {
            return Err(bad("give amplitudes for all terms or none"));
        }
        Ok(Initial::Explicit(terms))
    }

    /// Basis states with amplitudes; unspecified amplitudes are equal.
    pub fn resolve(&self, addend_bits: usize) -> Result<Vec<(BasisState, Complex64)>, CliError> {
        let numbers: Vec<(BigUint, Option<Complex64>)> = match self {
            Initial::Explicit(t) => t.iter().map(|(b, c)| (BigUint::from(*b), *c)).collect(),
            Initial::Random { useful, seed } => {
                if addend_bits < 64 && (*useful as u64) > (1u64 << addend_bits) {
                    return Err(CliError::Usage(format!("cannot draw {useful} distinct {addend_bits}-bit numbers")));
                }
                let mut rng = realization_rng(*seed, 0);
                let mut out: Vec<(BigUint, Option<Complex64>)> = Vec::with_capacity(*useful);
                while out.len() < *useful {
                    let b = random_number(addend_bits, &mut rng);
                    if out.iter().all(|(x, _)| *x != b) {
                        out.push((b, None));
                    }
                }
                out
            }
        };
        let equal = Complex64::new(1.0 / (numbers.len() as f64).sqrt(), 0.0);
        let mut terms = Vec::with_capacity(numbers.len());
        for (b, c) in numbers {
            let s = encode_addend_register(&b, addend_bits)?;
            if terms.iter().any(|(t, _)| *t == s) {
                return Err(CliError::Usage(format!("register value {b} appears twice")));
            }
            terms.push((s, c.unwrap_or(equal)));
        }
        let norm: f64 = terms.iter().map(|(_, c)| c.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(CliError::Usage(format!("initial amplitudes have squared norm {norm}, expected 1")));
        }
        Ok(terms)
    }
}

/// Fully resolved settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub k: u32,
    pub delta_omega: f64,
    pub addend_bits: usize,
    pub addend: Addend,
    pub initial: Initial,
    pub initial_text: String,
    pub map: MapConfig,
}

impl Settings {
    pub fn resolve(o: Overrides) -> Result<Settings, CliError> {
        let missing = |name: &str| CliError::Usage(format!("missing setting {name}"));
        let addend_text = o.addend.ok_or_else(|| missing("addend"))?;
        let addend = if addend_text == "sweep" {
            Addend::Sweep
        } else {
            Addend::Value(
                addend_text.parse().map_err(|_| CliError::Usage(format!("addend \"{addend_text}\" is not a number")))?,
            )
        };
        let initial_text = o.initial.ok_or_else(|| missing("initial"))?;
        let xi_factor = o.xi_factor.ok_or_else(|| missing("xi-factor"))?;
        if !(xi_factor > 0.0) {
            return Err(CliError::Usage(format!("xi-factor must be positive, got {xi_factor}")));
        }
        let realizations = o.realizations.ok_or_else(|| missing("realizations"))?;
        if realizations == 0 {
            return Err(CliError::Usage("realizations must be positive".into()));
        }
        Ok(Settings {
            k: o.k.ok_or_else(|| missing("k"))?,
            delta_omega: o.delta_omega.ok_or_else(|| missing("delta-omega"))?,
            addend_bits: o.addend_bits.ok_or_else(|| missing("addend-bits"))?,
            addend,
            initial: Initial::parse(&initial_text)?,
            initial_text,
            map: MapConfig {
                xi_factor,
                realizations,
                rng_seed: o.seed.ok_or_else(|| missing("seed"))?,
                track_counts: true,
            },
        })
    }

    pub fn addend_value(&self) -> Result<&BigUint, CliError> {
        match &self.addend {
            Addend::Value(a) => Ok(a),
            Addend::Sweep => Err(CliError::Usage("this command needs a single addend, not a sweep".into())),
        }
    }

    /// `key=value` pairs echoed into output headers.
    pub fn header(&self) -> Vec<(String, String)> {
        let addend = match &self.addend {
            Addend::Value(a) => a.to_string(),
            Addend::Sweep => "sweep".into(),
        };
        vec![
            ("k".into(), self.k.to_string()),
            ("delta_omega".into(), self.delta_omega.to_string()),
            ("addend_bits".into(), self.addend_bits.to_string()),
            ("addend".into(), addend),
            ("initial".into(), self.initial_text.clone()),
            ("xi_factor".into(), self.map.xi_factor.to_string()),
            ("realizations".into(), self.map.realizations.to_string()),
            ("seed".into(), self.map.rng_seed.to_string()),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_initial_forms() {
        assert_eq!(Initial::parse("random:20:7").unwrap(), Initial::Random { useful: 20, seed: 7 });
        let Initial::Explicit(t) = Initial::parse("3:0.6, 5:0:0.8").unwrap() else { panic!() };
        assert_eq!(t, vec![(3, Some(Complex64::new(0.6, 0.0))), (5, Some(Complex64::new(0.0, 0.8)))]);
        assert!(Initial::parse("3:0.6,5").is_err());
        assert!(Initial::parse("x").is_err());
        assert!(Initial::parse("random:0:1").is_err());
    }

    #[test]
    fn resolves_and_checks_norm() {
        let t = Initial::parse("2,5,11,12").unwrap().resolve(4).unwrap();
        assert!(t.iter().all(|(_, c)| (c.re - 0.5).abs() < 1e-15));
        assert!(Initial::parse("1:0.5,2:0.5").unwrap().resolve(4).is_err());
        assert!(Initial::parse("1,1").unwrap().resolve(4).is_err());
        assert!(Initial::parse("16").unwrap().resolve(4).is_err());
        assert_eq!(Initial::parse("random:5:1").unwrap().resolve(8).unwrap().len(), 5);
        assert!(Initial::parse("random:5:1").unwrap().resolve(2).is_err());
    }

    #[test]
    fn flags_override_file() {
        let file: Overrides = toml::from_str("k = 8\ndelta-omega = 50.0\n").unwrap();
        let flags = Overrides { k: Some(4), ..Overrides::default() };
        let s = Settings::resolve(flags.or(file).or(Overrides::defaults())).unwrap();
        assert_eq!((s.k, s.delta_omega, s.addend_bits), (4, 50.0, 4));
        assert!(toml::from_str::<Overrides>("bogus = 1").is_err());
    }
}
