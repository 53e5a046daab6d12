//! Sectioned key = value scenario files.
//!
//! ```text
//! [grid]
//! L = 40
//! N = 1024
//! [profile]
//! kind = gaussian
//! a = 0.1
//! [spectral]
//! taus = 2, 8, -2:-1      ; tau or tau:branch
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::profile::ProfileSpec;
use crate::spectral::SpectralParameter;
use crate::verify::Tolerances;

/// Check groups and the tolerance names each one reads.
pub const CHECK_GROUPS: [(&str, &[&str]); 9] = [
    (
        "identities",
        &[
            "quadratic",
            "ode",
            "symmetry",
            "branch",
            "a_symmetry",
            "commute",
            "bracket",
            "rho_to_a",
            "gamma2_slice",
            "decomposition",
            "trace",
            "methods",
        ],
    ),
    ("gradient", &["gradient"]),
    (
        "conservation",
        &["mass_drift", "hamiltonian_drift", "a_drift", "gauge"],
    ),
    ("continuity", &["continuity"]),
    ("lax", &["lax"]),
    ("dynamics", &["dynamics"]),
    ("asymptotics", &["slope"]),
    ("branch_parity", &["branch"]),
    ("uniformity", &["uniformity"]),
];

#[derive(Clone, Debug)]
struct Entry {
    value: String,
    line: usize,
}

#[derive(Clone, Debug, Default)]
struct Section {
    name: String,
    line: usize,
    entries: BTreeMap<String, Entry>,
    used: BTreeSet<String>,
}

impl Section {
    fn raw(&mut self, key: &str) -> Option<Entry> {
        self.used.insert(key.to_string());
        self.entries.get(key).cloned()
    }

    fn err(&self, line: usize, key: &str, msg: impl std::fmt::Display) -> Error {
        Error::Parse {
            line,
            msg: format!("[{}] {key}: {msg}", self.name),
        }
    }

    fn opt<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse::<T>()
                .map(Some)
                .map_err(|err| self.err(e.line, key, err)),
        }
    }

    fn req<T: std::str::FromStr>(&mut self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.opt(key)?
            .ok_or_else(|| self.err(self.line, key, "missing required key"))
    }

    fn list<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        let Some(e) = self.raw(key) else {
            return Ok(None);
        };
        e.value
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<T>()
                    .map_err(|err| self.err(e.line, key, format!("'{s}': {err}")))
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    fn finish(&self) -> Result<()> {
        match self.entries.iter().find(|(k, _)| !self.used.contains(*k)) {
            Some((k, e)) => Err(self.err(e.line, k, "unknown key")),
            None => Ok(()),
        }
    }
}

fn parse_sections(text: &str) -> Result<BTreeMap<String, Section>> {
    let mut sections: BTreeMap<String, Section> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split(['#', ';']).next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(name) = body.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| Error::Parse {
                    line,
                    msg: format!("unterminated section header '{body}'"),
                })?
                .trim()
                .to_string();
            if sections.contains_key(&name) {
                return Err(Error::Parse {
                    line,
                    msg: format!("duplicate section [{name}]"),
                });
            }
            sections.insert(
                name.clone(),
                Section {
                    name: name.clone(),
                    line,
                    ..Default::default()
                },
            );
            current = Some(name);
            continue;
        }
        let (key, value) = body.split_once('=').ok_or_else(|| Error::Parse {
            line,
            msg: format!("expected key = value, got '{body}'"),
        })?;
        let key = key.trim().to_string();
        let name = current.clone().ok_or_else(|| Error::Parse {
            line,
            msg: format!("key '{key}' outside any section"),
        })?;
        let sec = sections.get_mut(&name).expect("section registered");
        if sec.entries.contains_key(&key) {
            return Err(sec.err(line, &key, "duplicate key"));
        }
        sec.entries.insert(
            key,
            Entry {
                value: value.trim().to_string(),
                line,
            },
        );
    }
    Ok(sections)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridConfig {
    pub half_length: f64,
    pub n: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlowKind {
    Dnls,
    AKappa,
}

impl std::str::FromStr for FlowKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "dnls" => Ok(FlowKind::Dnls),
            "akappa" => Ok(FlowKind::AKappa),
            _ => Err(format!("unknown flow '{s}' (dnls | akappa)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowConfig {
    pub kind: FlowKind,
    pub generator_tau: Option<f64>,
    pub t_final: f64,
    pub dt: f64,
    pub stride: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub amplitudes: Vec<f64>,
    pub taus: Vec<f64>,
    pub s: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub formats: Vec<String>,
}

impl OutputConfig {
    pub fn wants(&self, fmt: &str) -> bool {
        self.formats.iter().any(|f| f == fmt)
    }
}

#[derive(Clone, Debug)]
pub struct ScenarioConfig {
    /// source text, hashed into every report
    pub text: String,
    pub grid: GridConfig,
    pub profile: ProfileSpec,
    pub taus: Vec<SpectralParameter>,
    pub asymptotic_taus: Vec<f64>,
    pub flow: FlowConfig,
    pub tolerances: Tolerances,
    pub sweep: SweepConfig,
    pub output: OutputConfig,
    pub checks: BTreeSet<String>,
    pub tail_threshold: f64,
    pub lax_fields: usize,
    pub seed: u64,
}

fn parse_tau(s: &str) -> std::result::Result<SpectralParameter, String> {
    let (t, b) = match s.split_once(':') {
        Some((t, b)) => (t, b.trim().parse::<i8>().map_err(|e| e.to_string())?),
        None => (s, 1),
    };
    if b != 1 && b != -1 {
        return Err(format!("branch must be 1 or -1, got {b}"));
    }
    let tau: f64 = t
        .trim()
        .parse()
        .map_err(|e: std::num::ParseFloatError| e.to_string())?;
    SpectralParameter::with_branch(tau, b).map_err(|e| e.to_string())
}

struct TauItem(SpectralParameter);

impl std::str::FromStr for TauItem {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        parse_tau(s).map(TauItem)
    }
}

struct Threshold(f64);

impl std::str::FromStr for Threshold {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let t: f64 = s
            .parse()
            .map_err(|e: std::num::ParseFloatError| e.to_string())?;
        SpectralParameter::new(t).map_err(|e| e.to_string())?;
        Ok(Threshold(t))
    }
}

fn positive(sec: &Section, key: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        let line = sec.entries.get(key).map_or(sec.line, |e| e.line);
        Err(sec.err(line, key, format!("must be positive, got {v}")))
    }
}

fn profile(sec: &mut Section, base: &Path) -> Result<ProfileSpec> {
    let kind: String = sec.req("kind")?;
    let spec = match kind.as_str() {
        "zero" => ProfileSpec::Zero,
        "gaussian" => ProfileSpec::Gaussian {
            a: sec.req("a")?,
            w: sec.opt("w")?.unwrap_or(1.0),
            x0: sec.opt("x0")?.unwrap_or(0.0),
            chirp: sec.opt("chirp")?.unwrap_or(0.0),
            k0: sec.opt("k0")?.unwrap_or(0.0),
        },
        "sech" => ProfileSpec::Sech {
            a: sec.req("a")?,
            w: sec.opt("w")?.unwrap_or(1.0),
            x0: sec.opt("x0")?.unwrap_or(0.0),
        },
        "file" => {
            let p: PathBuf = sec.req("path")?;
            ProfileSpec::File(if p.is_absolute() { p } else { base.join(p) })
        }
        other => {
            let line = sec.entries["kind"].line;
            return Err(sec.err(
                line,
                "kind",
                format!("unknown profile '{other}' (zero | gaussian | sech | file)"),
            ));
        }
    };
    if let ProfileSpec::Gaussian { w, .. } | ProfileSpec::Sech { w, .. } = &spec {
        positive(sec, "w", *w)?;
    }
    Ok(spec)
}

impl ScenarioConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut secs = parse_sections(text)?;
        const KNOWN: [&str; 9] = [
            "grid",
            "profile",
            "spectral",
            "flow",
            "tolerances",
            "sweep",
            "output",
            "checks",
            "lax",
        ];
        if let Some(s) = secs.values().find(|s| !KNOWN.contains(&s.name.as_str())) {
            return Err(Error::Parse {
                line: s.line,
                msg: format!("unknown section [{}]", s.name),
            });
        }
        let mut take = |name: &str| -> Result<Section> {
            secs.remove(name)
                .ok_or_else(|| Error::Config(format!("missing section [{name}]")))
        };

        let mut g = take("grid")?;
        let grid = GridConfig {
            half_length: g.req("L")?,
            n: g.req("N")?,
        };
        positive(&g, "L", grid.half_length)?;
        g.finish()?;

        let mut p = take("profile")?;
        let profile = profile(&mut p, base)?;
        let tail_threshold = p.opt("tail_threshold")?.unwrap_or(1e-12);
        p.finish()?;

        let mut s = take("spectral")?;
        let taus: Vec<SpectralParameter> = s
            .list::<TauItem>("taus")?
            .unwrap_or_default()
            .into_iter()
            .map(|t| t.0)
            .collect();
        if taus.is_empty() {
            return Err(s.err(s.line, "taus", "at least one spectral parameter required"));
        }
        let asymptotic_taus: Vec<f64> = s
            .list::<Threshold>("asymptotic_taus")?
            .unwrap_or_default()
            .into_iter()
            .map(|t| t.0)
            .collect();
        s.finish()?;

        let mut f = take("flow")?;
        let flow = FlowConfig {
            kind: f.req("kind")?,
            generator_tau: f.opt::<Threshold>("generator_tau")?.map(|t| t.0),
            t_final: f.req("T")?,
            dt: f.req("dt")?,
            stride: f.opt("stride")?.unwrap_or(1),
        };
        positive(&f, "T", flow.t_final)?;
        positive(&f, "dt", flow.dt)?;
        if flow.stride == 0 {
            return Err(f.err(
                f.entries.get("stride").map_or(f.line, |e| e.line),
                "stride",
                "must be at least 1",
            ));
        }
        if flow.kind == FlowKind::AKappa && flow.generator_tau.is_none() {
            return Err(f.err(f.line, "generator_tau", "required for the akappa flow"));
        }
        f.finish()?;

        let mut t = take("tolerances")?;
        let keys: Vec<String> = t.entries.keys().cloned().collect();
        let mut tolerances = Tolerances(BTreeMap::new());
        for k in keys {
            let v: f64 = t.req(&k)?;
            if !(v >= 0.0) {
                return Err(t.err(t.entries[&k].line, &k, "tolerance must be non-negative"));
            }
            tolerances.set(&k, v);
        }

        let sweep = match secs.remove("sweep") {
            Some(mut w) => {
                let sw = SweepConfig {
                    amplitudes: w.list("amplitudes")?.unwrap_or_default(),
                    taus: w
                        .list::<Threshold>("taus")?
                        .unwrap_or_default()
                        .into_iter()
                        .map(|t| t.0)
                        .collect(),
                    s: w.opt("s")?.unwrap_or(0.25),
                };
                if !(sw.s > 0.0 && sw.s < 0.5) {
                    return Err(w.err(
                        w.entries.get("s").map_or(w.line, |e| e.line),
                        "s",
                        "must lie in (0, 1/2)",
                    ));
                }
                w.finish()?;
                sw
            }
            None => SweepConfig {
                amplitudes: Vec::new(),
                taus: Vec::new(),
                s: 0.25,
            },
        };

        let output = match secs.remove("output") {
            Some(mut o) => {
                let dir: PathBuf = o.opt("dir")?.unwrap_or_else(|| PathBuf::from("out"));
                let formats: Vec<String> = o
                    .list("formats")?
                    .unwrap_or_else(|| vec!["csv".into(), "json".into()]);
                if let Some(bad) = formats.iter().find(|f| *f != "csv" && *f != "json") {
                    return Err(o.err(
                        o.entries["formats"].line,
                        "formats",
                        format!("unknown format '{bad}' (csv | json)"),
                    ));
                }
                o.finish()?;
                OutputConfig {
                    dir: if dir.is_absolute() {
                        dir
                    } else {
                        base.join(dir)
                    },
                    formats,
                }
            }
            None => OutputConfig {
                dir: base.join("out"),
                formats: vec!["csv".into(), "json".into()],
            },
        };

        let checks: BTreeSet<String> = match secs.remove("checks") {
            Some(mut c) => {
                let list: Vec<String> = c.list("enabled")?.unwrap_or_default();
                for name in &list {
                    if !CHECK_GROUPS.iter().any(|(g, _)| g == name) {
                        return Err(c.err(
                            c.entries["enabled"].line,
                            "enabled",
                            format!("unknown check group '{name}'"),
                        ));
                    }
                }
                c.finish()?;
                list.into_iter().collect()
            }
            None => CHECK_GROUPS.iter().map(|(g, _)| g.to_string()).collect(),
        };

        let (lax_fields, seed) = match secs.remove("lax") {
            Some(mut l) => {
                let v = (l.opt("fields")?.unwrap_or(8), l.opt("seed")?.unwrap_or(7));
                l.finish()?;
                v
            }
            None => (8, 7),
        };

        let cfg = ScenarioConfig {
            text: text.to_string(),
            grid,
            profile,
            taus,
            asymptotic_taus,
            flow,
            tolerances,
            sweep,
            output,
            checks,
            tail_threshold,
            lax_fields,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn enabled(&self, group: &str) -> bool {
        self.checks.contains(group)
    }

    /// Every enabled check group must find all of its tolerances.
    pub fn validate(&self) -> Result<()> {
        for (group, keys) in CHECK_GROUPS {
            if !self.enabled(group) {
                continue;
            }
            if let Some(k) = keys.iter().find(|k| !self.tolerances.0.contains_key(**k)) {
                return Err(Error::Config(format!(
                    "tolerance map has no entry '{k}' needed by enabled check '{group}'"
                )));
            }
        }
        if self.flow.dt <= 0.0 {
            return Err(Error::Config(format!(
                "dt must be positive, got {}",
                self.flow.dt
            )));
        }
        Ok(())
    }

    /// The generator of the A-flow, falling back to the first tau.
    pub fn generator(&self) -> SpectralParameter {
        match self.flow.generator_tau {
            Some(t) => SpectralParameter::new(t).expect("validated at parse time"),
            None => self.taus[0],
        }
    }

    /// `tau` replaces the tau list (and the generator), `amplitude` rescales the profile.
    pub fn apply_overrides(
        &mut self,
        tau: &[f64],
        amplitude: Option<f64>,
        dt: Option<f64>,
        out: Option<PathBuf>,
        flow: Option<FlowKind>,
    ) -> Result<()> {
        if !tau.is_empty() {
            let mut seen = Vec::new();
            for t in tau {
                if seen.contains(t) {
                    return Err(Error::Config(format!(
                        "conflicting overrides: --tau {t} given twice"
                    )));
                }
                seen.push(*t);
            }
            self.taus = tau
                .iter()
                .map(|t| SpectralParameter::new(*t))
                .collect::<Result<_>>()?;
            self.flow.generator_tau = Some(tau[0]);
        }
        if let Some(a) = amplitude {
            match self.profile {
                ProfileSpec::Zero | ProfileSpec::File(_) => {
                    return Err(Error::Config(
                        "conflicting overrides: --amplitude needs a gaussian or sech profile"
                            .into(),
                    ))
                }
                _ => self.profile = self.profile.with_amplitude(a),
            }
        }
        if let Some(dt) = dt {
            self.flow.dt = dt;
        }
        if let Some(o) = out {
            self.output.dir = o;
        }
        if let Some(k) = flow {
            self.flow.kind = k;
            if k == FlowKind::AKappa && self.flow.generator_tau.is_none() {
                return Err(Error::Config(
                    "the akappa flow needs --tau or flow.generator_tau".into(),
                ));
            }
        }
        self.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
[grid]
L = 40
N = 256
[profile]
kind = gaussian
a = 0.1   # amplitude
[spectral]
taus = 2, -8:-1
[flow]
kind = dnls
T = 0.1
dt = 1e-3
stride = 10
[tolerances]
quadratic = 1e-8
[checks]
enabled = identities
";

    fn full_tolerances() -> String {
        let keys: std::collections::BTreeSet<&str> = CHECK_GROUPS
            .iter()
            .flat_map(|(_, k)| k.iter().copied())
            .collect();
        let mut s = String::from("[tolerances]\n");
        for k in keys {
            s.push_str(&format!("{k} = 1e-6\n"));
        }
        s
    }

    fn with_full(text: &str) -> String {
        let start = text.find("[tolerances]").unwrap();
        let end = text.find("[checks]").unwrap();
        format!("{}{}{}", &text[..start], full_tolerances(), &text[end..])
    }

    #[test]
    fn parses_sample() {
        let c = ScenarioConfig::parse(&with_full(SAMPLE), Path::new("/tmp")).unwrap();
        assert_eq!(
            c.grid,
            GridConfig {
                half_length: 40.0,
                n: 256
            }
        );
        assert_eq!(c.profile, ProfileSpec::gaussian(0.1));
        assert_eq!(c.taus[1].tau(), -8.0);
        assert_eq!(c.taus[1].branch(), -1);
        assert_eq!(c.flow.stride, 10);
        assert_eq!(c.output.dir, PathBuf::from("/tmp/out"));
        assert!(c.enabled("identities") && !c.enabled("lax"));
    }

    #[test]
    fn tolerance_gap_is_reported() {
        let e = ScenarioConfig::parse(SAMPLE, Path::new(".")).unwrap_err();
        assert!(e.to_string().contains("'ode'"), "{e}");
    }

    #[test]
    fn small_tau_rejected() {
        let t = with_full(SAMPLE).replace("taus = 2, -8:-1", "taus = 0.5");
        let e = ScenarioConfig::parse(&t, Path::new(".")).unwrap_err();
        assert!(
            e.to_string()
                .contains("spectral parameter below unit threshold"),
            "{e}"
        );
        assert!(e.to_string().contains("line 8"), "{e}");
    }

    #[test]
    fn diagnostics_name_line_and_key() {
        let t = with_full(SAMPLE).replace("dt = 1e-3", "dt = fast");
        let e = ScenarioConfig::parse(&t, Path::new("."))
            .unwrap_err()
            .to_string();
        assert!(e.contains("line 12") && e.contains("[flow] dt"), "{e}");
        let t = with_full(SAMPLE).replace("stride = 10", "strid = 10");
        let e = ScenarioConfig::parse(&t, Path::new("."))
            .unwrap_err()
            .to_string();
        assert!(e.contains("unknown key") && e.contains("strid"), "{e}");
        let e = ScenarioConfig::parse("[grid]\nL = 1\nL = 2\n", Path::new("."))
            .unwrap_err()
            .to_string();
        assert!(e.contains("line 3") && e.contains("duplicate"), "{e}");
        let e = ScenarioConfig::parse("L = 1\n", Path::new("."))
            .unwrap_err()
            .to_string();
        assert!(e.contains("outside any section"), "{e}");
        let e = ScenarioConfig::parse("[grid\n", Path::new("."))
            .unwrap_err()
            .to_string();
        assert!(e.contains("line 1"), "{e}");
        let t = with_full(SAMPLE).replace("[checks]", "[extra]\nx = 1\n[checks]");
        assert!(ScenarioConfig::parse(&t, Path::new("."))
            .unwrap_err()
            .to_string()
            .contains("unknown section"));
    }

    #[test]
    fn overrides() {
        let mut c = ScenarioConfig::parse(&with_full(SAMPLE), Path::new(".")).unwrap();
        c.apply_overrides(
            &[4.0],
            Some(0.05),
            Some(5e-4),
            Some("o".into()),
            Some(FlowKind::AKappa),
        )
        .unwrap();
        assert_eq!(c.taus.len(), 1);
        assert_eq!(c.generator().tau(), 4.0);
        assert_eq!(c.profile, ProfileSpec::gaussian(0.05));
        assert_eq!(c.flow.dt, 5e-4);
        assert!(c.apply_overrides(&[0.5], None, None, None, None).is_err());
        assert!(c
            .apply_overrides(&[2.0, 2.0], None, None, None, None)
            .is_err());
        assert!(c
            .apply_overrides(&[], None, Some(-1.0), None, None)
            .is_err());
        c.profile = ProfileSpec::Zero;
        assert!(c.apply_overrides(&[], Some(0.1), None, None, None).is_err());
    }
}
