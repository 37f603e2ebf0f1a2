//! Flat `key = value` experiment configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use lamiflow::diffusion::Slope;
use lamiflow::{Exec, Tolerances};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    /// strictly positive real
    Positive,
    Count,
    Seed,
    /// comma-separated reals
    List,
    Slope,
    Exec,
}

struct Key {
    name: &'static str,
    default: &'static str,
    kind: Kind,
    doc: &'static str,
}

macro_rules! keys {
    ($($name:literal, $default:literal, $kind:ident, $doc:literal;)*) => {
        &[$(Key { name: $name, default: $default, kind: Kind::$kind, doc: $doc }),*]
    };
}

const SCHEMA: &[Key] = keys![
    "seed", "42", Seed, "Monte Carlo and random-pair seed (overridden by --seed)";
    "exec", "parallel", Exec, "parallel | sequential";
    "kernel_abs", "1e-8", Positive, "absolute quadrature tolerance";
    "kernel_rel", "1e-10", Positive, "relative quadrature tolerance";
    "green_rel", "1e-11", Positive, "relative residual of the Green solver";
    "solver_rel", "1e-14", Positive, "relative residual of implicit-Euler solves";
    "max_solver_iterations", "200000", Count, "iteration cap of the linear solvers";

    "kernel_times", "0.1,1,10", List, "kernel-identities: times of the normalization check";
    "green_radii", "0.3,0.6,0.9", List, "kernel-identities: |y| of the Green identity check";
    "normalization_tol", "1e-6", Positive, "kernel-identities: absolute tolerance";
    "green_identity_tol", "1e-4", Positive, "kernel-identities: relative tolerance";

    "m_r_grid", "1,2,4,8,16", List, "tail-estimates: R values for M_R";
    "m_r_offset_bound", "8.710344361683671", Positive, "tail-estimates: bound on |M_R - 2πR| (4π log 2)";
    "m_r_linearity_from", "4", Positive, "tail-estimates: smallest R of the ratio bracket";
    "m_r_bracket", "0.2", Positive, "tail-estimates: allowed |M_R/(2πR) - 1|";
    "comparison_r_grid", "4,8,16", List, "tail-estimates: R values of the B-vs-heat comparison";
    "comparison_constant", "0.25", Positive, "tail-estimates: bound on discrepancy·R^{1/2}(log R)^{-1/2}";
    "angular_nodes", "64", Count, "tail-estimates: angular rule size";
    "tail_r_grid", "8,16,32", List, "tail-estimates: R values of the tail-mass check";
    "tail_constant", "10", Positive, "tail-estimates: bound on tail mass / scale";

    "mass_identity_r", "3", Positive, "birkhoff-equidistribution: R of the mass identity";
    "mass_identity_samples", "10000", Count, "birkhoff-equidistribution: outer samples";
    "mass_identity_spacing", "0.25", Positive, "birkhoff-equidistribution: grid spacing of the inner average";
    "mass_identity_sigmas", "3", Positive, "birkhoff-equidistribution: allowed z-score";
    "equidistribution_seed", "2024", Seed, "birkhoff-equidistribution: seed of the base points";
    "equidistribution_points", "5", Count, "birkhoff-equidistribution: number of base points";
    "equidistribution_r_grid", "2,4,6,8", List, "birkhoff-equidistribution: R values";
    "ball_radius", "0.5", Positive, "birkhoff-equidistribution: geodesic ball radius";
    "equidistribution_tol", "0.1", Positive, "birkhoff-equidistribution: error bound at the largest R";
    "equidistribution_min_decreasing", "4", Count, "birkhoff-equidistribution: points whose error must decrease";

    "kronecker_n", "64", Count, "diffusion: torus side N";
    "slope", "1.618033988749895", Slope, "diffusion: leaf slope, a real or p/q";
    "tau", "0.05", Positive, "diffusion: implicit-Euler step";
    "steps", "200", Count, "diffusion-ergodic: steps of the identity run";
    "mass_tol", "1e-10", Positive, "diffusion-ergodic: per-step mass drift";
    "contraction_tol", "1e-12", Positive, "diffusion-ergodic: relative norm growth per step";
    "positivity_tol", "1e-12", Positive, "diffusion-ergodic: negative excursion of nonnegative data";
    "ergodic_horizons", "10,40,160", List, "diffusion-ergodic: averaging horizons";
    "ergodic_fraction", "0.05", Positive, "diffusion-ergodic: final distance / initial spread";
    "mixing_grid", "0,0.25,0.5,1,2,4", List, "diffusion-mixing: correlation times";
    "mixing_fraction", "1e-3", Positive, "diffusion-mixing: final / initial correlation";
    "self_adjoint_tol", "1e-8", Positive, "diffusion-mixing: |<S(2t)u,u> - |S(t)u|^2|";
    "hille_yosida_slack", "1.5", Positive, "diffusion-mixing: factor on |u0|/t";
    "segment_length", "64", Count, "diffusion-mixing: weighted segment length";
    "segment_h0", "1", Positive, "diffusion-mixing: weight at the left end";
    "segment_h1", "4", Positive, "diffusion-mixing: weight at the right end";
    "energy_pairs", "100", Count, "diffusion-mixing: random pairs";
    "energy_tol", "1e-12", Positive, "diffusion-mixing: relative tolerance of the energy identities";

    "skoda_r_min", "1e-3", Positive, "skoda: smallest radius";
    "skoda_r_max", "1e-1", Positive, "skoda: largest radius";
    "skoda_radii", "9", Count, "skoda: number of radii";
    "monotone_tol", "1e-6", Positive, "skoda: relative drop allowed in the ratio";
    "lelong_tols", "1e-3,1e-3,2e-2", List, "skoda: Lelong tolerances for line, two lines, cusp";
    "poincare_tol", "1e-6", Positive, "skoda: Poincaré-mass integral vs closed form";

    "theta_norms", "1e-1,1e-2,1e-3,1e-4", List, "linear-foliation-theta: values of |a|";
    "theta_box_factor", "6", Positive, "linear-foliation-theta: truncation box / inradius";
    "theta_cells", "128", Positive, "linear-foliation-theta: cells per inradius";
    "theta_window", "4", Positive, "linear-foliation-theta: width of the normalized window";
    "theta_upper_slack", "0.05", Positive, "linear-foliation-theta: relative slack on the upper bound";
    "green_cells", "128", Count, "linear-foliation-theta: disc grid cells per unit (coarse run uses half)";
    "green_density_tol", "0.02", Positive, "linear-foliation-theta: density error at the fine grid";
];

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    values: BTreeMap<&'static str, String>,
}

fn check(kind: Kind, key: &str, v: &str) -> Result<(), ConfigError> {
    let bad = |what: &str| Err(ConfigError(format!("{key}: {what}, got {v:?}")));
    let real = |s: &str| s.trim().parse::<f64>().ok().filter(|x| x.is_finite());
    match kind {
        Kind::Positive => match real(v) {
            Some(x) if x > 0.0 => Ok(()),
            _ => bad("expected a positive number"),
        },
        Kind::Count => match v.parse::<usize>() {
            Ok(n) if n > 0 => Ok(()),
            _ => bad("expected a positive integer"),
        },
        Kind::Seed => v.parse::<u64>().map(|_| ()).or_else(|_| bad("expected a nonnegative integer")),
        Kind::List => {
            if !v.is_empty() && v.split(',').all(|s| real(s).is_some()) {
                Ok(())
            } else {
                bad("expected comma-separated numbers")
            }
        }
        Kind::Slope => {
            if let Some((p, q)) = v.split_once('/') {
                match (p.trim().parse::<i64>(), q.trim().parse::<i64>()) {
                    (Ok(_), Ok(q)) if q > 0 => Ok(()),
                    _ => bad("expected p/q with q > 0"),
                }
            } else {
                real(v).map(|_| ()).map_or_else(|| bad("expected a number or p/q"), Ok)
            }
        }
        Kind::Exec => match v {
            "parallel" | "sequential" => Ok(()),
            _ => bad("expected parallel or sequential"),
        },
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            values: SCHEMA.iter().map(|k| (k.name, k.default.to_string())).collect(),
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut seen = std::collections::BTreeSet::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ConfigError(format!("line {}: expected key = value", no + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if !seen.insert(k.to_string()) {
                return Err(ConfigError(format!("line {}: duplicate key {k}", no + 1)));
            }
            cfg.set(k, v).map_err(|e| ConfigError(format!("line {}: {}", no + 1, e.0)))?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let k = SCHEMA
            .iter()
            .find(|k| k.name == key)
            .ok_or_else(|| ConfigError(format!("unknown key {key}")))?;
        check(k.kind, key, value)?;
        self.values.insert(k.name, value.to_string());
        Ok(())
    }

    /// Cross-key checks.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.real("skoda_r_min") >= self.real("skoda_r_max") || self.real("skoda_r_max") >= 0.5 {
            return Err(ConfigError("skoda radii must satisfy skoda_r_min < skoda_r_max < 1/2".into()));
        }
        if self.count("skoda_radii") < 3 {
            return Err(ConfigError("skoda_radii must be at least 3".into()));
        }
        if self.list("lelong_tols").len() != 3 || self.list("lelong_tols").iter().any(|t| *t <= 0.0) {
            return Err(ConfigError("lelong_tols needs three positive entries".into()));
        }
        for key in ["kernel_times", "green_radii", "m_r_grid", "comparison_r_grid", "tail_r_grid", "equidistribution_r_grid", "ergodic_horizons", "theta_norms"] {
            if self.list(key).iter().any(|x| *x <= 0.0) {
                return Err(ConfigError(format!("{key}: entries must be positive")));
            }
        }
        for key in ["comparison_r_grid", "equidistribution_r_grid", "ergodic_horizons", "mixing_grid"] {
            if self.list(key).windows(2).any(|w| w[1] <= w[0]) {
                return Err(ConfigError(format!("{key}: entries must be strictly increasing")));
            }
        }
        if self.list("green_radii").iter().any(|r| *r >= 1.0) || self.list("theta_norms").iter().any(|r| *r >= 1.0) {
            return Err(ConfigError("green_radii and theta_norms must lie in (0, 1)".into()));
        }
        if self.list("mixing_grid").iter().any(|t| *t < 0.0) {
            return Err(ConfigError("mixing_grid: times must be nonnegative".into()));
        }
        Ok(())
    }

    fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or_else(|| panic!("schema has no key {key}"))
    }

    pub fn real(&self, key: &str) -> f64 {
        self.raw(key).parse().expect("validated")
    }

    pub fn count(&self, key: &str) -> usize {
        self.raw(key).parse().expect("validated")
    }

    pub fn seed(&self, key: &str) -> u64 {
        self.raw(key).parse().expect("validated")
    }

    pub fn list(&self, key: &str) -> Vec<f64> {
        self.raw(key).split(',').map(|s| s.trim().parse().expect("validated")).collect()
    }

    pub fn slope(&self) -> Slope {
        let v = self.raw("slope");
        match v.split_once('/') {
            Some((p, q)) => Slope::Rational(p.trim().parse().expect("validated"), q.trim().parse().expect("validated")),
            None => Slope::Irrational(v.parse().expect("validated")),
        }
    }

    pub fn exec(&self) -> Exec {
        match self.raw("exec") {
            "sequential" => Exec::Sequential,
            _ => Exec::Parallel,
        }
    }

    pub fn tolerances(&self) -> Tolerances {
        let mut t = Tolerances::default().with_abs(self.real("kernel_abs"));
        t.kernel_rel = self.real("kernel_rel");
        t.green_cg_rel = self.real("green_rel");
        t.semigroup_rel = self.real("solver_rel");
        t.max_solver_iterations = self.count("max_solver_iterations");
        t
    }

    /// The effective configuration, one documented key per line.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for k in SCHEMA {
            let _ = writeln!(s, "# {}\n{} = {}", k.doc, k.name, self.raw(k.name));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        let back = ExperimentConfig::parse(&c.render()).unwrap();
        assert_eq!(back, c);
        assert_eq!(c.list("kernel_times"), vec![0.1, 1.0, 10.0]);
        assert_eq!(c.slope(), Slope::Irrational(1.618033988749895));
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(ExperimentConfig::parse("normalization_tol = -1").is_err());
        assert!(ExperimentConfig::parse("no_such_key = 1").is_err());
        assert!(ExperimentConfig::parse("seed = 1\nseed = 2").is_err());
        assert!(ExperimentConfig::parse("just words").is_err());
        assert!(ExperimentConfig::parse("kernel_times = 1,,2").is_err());
        assert!(ExperimentConfig::parse("slope = 1/0").is_err());
        assert!(ExperimentConfig::parse("exec = gpu").is_err());
        let c = ExperimentConfig::parse("skoda_r_min = 0.2\nskoda_r_max = 0.1").unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn parses_comments_and_rational_slopes() {
        let c = ExperimentConfig::parse("# header\n slope = 1/4  # leaves\n\ntau=0.1").unwrap();
        assert_eq!(c.slope(), Slope::Rational(1, 4));
        assert_eq!(c.real("tau"), 0.1);
    }
}
