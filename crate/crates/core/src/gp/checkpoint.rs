use std::fmt::Write as _;
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use super::evolve::GpState;
use super::{GpError, Individual, Origin};
use crate::expr::parse_expr;

const MAGIC: &str = "# gp checkpoint v1";

/// Text snapshot of a [`GpState`]: generation, random stream position and
/// one `fitness origin expression` line per individual.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint(pub String);

impl Checkpoint {
    pub fn capture(state: &GpState) -> Self {
        let mut s = String::new();
        let seed: String = state.rng.get_seed().iter().map(|b| format!("{b:02x}")).collect();
        writeln!(s, "{MAGIC}").unwrap();
        writeln!(s, "generation {}", state.generation).unwrap();
        writeln!(s, "rng_seed {seed}").unwrap();
        writeln!(s, "rng_stream {}", state.rng.get_stream()).unwrap();
        writeln!(s, "rng_word_pos {}", state.rng.get_word_pos()).unwrap();
        writeln!(s, "population {}", state.population.len()).unwrap();
        for ind in &state.population {
            let fit = ind.fitness.map_or("none".to_string(), |f| f.to_string());
            writeln!(s, "{fit}\t{}\t{}", ind.origin, ind.tree).unwrap();
        }
        Checkpoint(s)
    }

    pub fn restore(&self) -> Result<GpState, GpError> {
        let bad = |m: String| GpError::Checkpoint(m);
        let mut lines = self.0.lines();
        if lines.next() != Some(MAGIC) {
            return Err(bad("missing header".into()));
        }
        let mut field = |name: &str| -> Result<String, GpError> {
            let line = lines.next().ok_or_else(|| bad(format!("missing {name}")))?;
            line.strip_prefix(name)
                .and_then(|r| r.strip_prefix(' '))
                .map(str::to_string)
                .ok_or_else(|| bad(format!("expected {name}, found `{line}`")))
        };
        let num = |s: String, name: &str| s.parse::<u128>().map_err(|_| bad(format!("bad {name} `{s}`")));
        let generation = num(field("generation")?, "generation")? as usize;
        let seed_hex = field("rng_seed")?;
        let stream = num(field("rng_stream")?, "rng_stream")? as u64;
        let word_pos = num(field("rng_word_pos")?, "rng_word_pos")?;
        let n = num(field("population")?, "population")? as usize;
        if seed_hex.len() != 64 {
            return Err(bad("rng seed must be 32 bytes".into()));
        }
        let mut seed = [0u8; 32];
        for (i, b) in seed.iter_mut().enumerate() {
            *b = u8::from_str_radix(&seed_hex[2 * i..2 * i + 2], 16).map_err(|_| bad("bad rng seed".into()))?;
        }
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(stream);
        rng.set_word_pos(word_pos);

        let mut population = Vec::with_capacity(n);
        for line in lines.by_ref().take(n) {
            let mut parts = line.splitn(3, '\t');
            let (f, o, e) = match (parts.next(), parts.next(), parts.next()) {
                (Some(f), Some(o), Some(e)) => (f, o, e),
                _ => return Err(bad(format!("malformed individual `{line}`"))),
            };
            let fitness = match f {
                "none" => None,
                _ => Some(f.parse::<f64>().map_err(|_| bad(format!("bad fitness `{f}`")))?),
            };
            let origin: Origin = o.parse().map_err(bad)?;
            let tree = parse_expr(e).map_err(|err| bad(err.to_string()))?;
            population.push(Individual { tree, fitness, origin });
        }
        if population.len() != n {
            return Err(bad(format!("expected {n} individuals, found {}", population.len())));
        }
        Ok(GpState { population, generation, rng })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), GpError> {
        std::fs::write(path, &self.0)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GpError> {
        Ok(Checkpoint(std::fs::read_to_string(path)?))
    }
}
