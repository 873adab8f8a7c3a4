//! Line-oriented instance files.
//!
//! ```text
//! tsp <n> <x1> <y1> ... <xn> <yn> [sol <i1> ... <in>]
//! mis <n> <m> <u1> <v1> ... <um> <vm> [sol <i1> ... <ik>]
//! ```
//!
//! One instance per line; blank lines and lines starting with `#` are
//! skipped. Instance ids are assigned in file order starting at 0.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{IndependentSet, Instance, InstanceError, MisInstance, Tour, TspInstance};

pub fn format_instance(instance: &Instance) -> String {
    let mut out = String::new();
    match instance {
        Instance::Tsp(t) => {
            out.push_str(&format!("tsp {}", t.n()));
            for c in t.coords() {
                out.push_str(&format!(" {} {}", c[0], c[1]));
            }
            if let Some(tour) = t.label() {
                out.push_str(" sol");
                for v in tour.order() {
                    out.push_str(&format!(" {v}"));
                }
            }
        }
        Instance::Mis(g) => {
            out.push_str(&format!("mis {} {}", g.n(), g.edges().len()));
            for (u, v) in g.edges() {
                out.push_str(&format!(" {u} {v}"));
            }
            if let Some(set) = g.label() {
                out.push_str(" sol");
                for v in set.nodes() {
                    out.push_str(&format!(" {v}"));
                }
            }
        }
    }
    out
}

pub fn save_instances(path: impl AsRef<Path>, instances: &[Instance]) -> Result<(), InstanceError> {
    let mut buf = Vec::new();
    for inst in instances {
        writeln!(buf, "{}", format_instance(inst))?;
    }
    fs::write(path, buf)?;
    Ok(())
}

/// Load every instance in a file. Any malformed line fails the whole load.
pub fn load_instances(path: impl AsRef<Path>) -> Result<Vec<Instance>, InstanceError> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        out.push(parse_instance(trimmed, idx + 1, out.len())?);
    }
    Ok(out)
}

struct Tokens<'a> {
    inner: std::iter::Peekable<std::str::SplitAsciiWhitespace<'a>>,
    line: usize,
}

impl<'a> Tokens<'a> {
    fn err(&self, message: impl Into<String>) -> InstanceError {
        InstanceError::Parse { line: self.line, message: message.into() }
    }

    fn next_str(&mut self, what: &str) -> Result<&'a str, InstanceError> {
        self.inner.next().ok_or_else(|| self.err(format!("missing {what}")))
    }

    fn next_usize(&mut self, what: &str) -> Result<usize, InstanceError> {
        let tok = self.next_str(what)?;
        tok.parse().map_err(|_| self.err(format!("{what}: `{tok}` is not a non-negative integer")))
    }

    fn next_f64(&mut self, what: &str) -> Result<f64, InstanceError> {
        let tok = self.next_str(what)?;
        match tok.parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(x),
            _ => Err(self.err(format!("{what}: `{tok}` is not a finite number"))),
        }
    }

    /// Optional `sol` section; returns the listed indices.
    fn solution(&mut self) -> Result<Option<Vec<usize>>, InstanceError> {
        match self.inner.next() {
            None => Ok(None),
            Some("sol") => {
                let mut ids = Vec::new();
                while self.inner.peek().is_some() {
                    ids.push(self.next_usize("solution index")?);
                }
                Ok(Some(ids))
            }
            Some(other) => Err(self.err(format!("unexpected token `{other}` (expected `sol` or end of line)"))),
        }
    }
}

/// Parse one instance line. `line` is the 1-based line number used in errors.
pub fn parse_instance(text: &str, line: usize, id: usize) -> Result<Instance, InstanceError> {
    let mut toks = Tokens { inner: text.split_ascii_whitespace().peekable(), line };
    let kind = toks.next_str("instance kind")?;
    let relabel = |e: InstanceError| match e {
        InstanceError::Parse { .. } => e,
        other => InstanceError::Parse { line, message: other.to_string() },
    };
    match kind {
        "tsp" => {
            let n = toks.next_usize("node count")?;
            let mut coords = Vec::with_capacity(n);
            for i in 0..n {
                let x = toks.next_f64(&format!("x of node {i}"))?;
                let y = toks.next_f64(&format!("y of node {i}"))?;
                coords.push([x, y]);
            }
            let sol = toks.solution()?;
            let mut inst = TspInstance::new(id, coords).map_err(relabel)?;
            if let Some(order) = sol {
                let tour = Tour::new(order, inst.coords()).map_err(relabel)?;
                inst.set_label(tour).map_err(relabel)?;
            }
            Ok(Instance::Tsp(inst))
        }
        "mis" => {
            let n = toks.next_usize("node count")?;
            let m = toks.next_usize("edge count")?;
            let mut edges = Vec::with_capacity(m);
            for e in 0..m {
                let u = toks.next_usize(&format!("edge {e} endpoint"))?;
                let v = toks.next_usize(&format!("edge {e} endpoint"))?;
                edges.push((u, v));
            }
            let sol = toks.solution()?;
            let mut inst = MisInstance::new(id, n, &edges).map_err(relabel)?;
            if let Some(nodes) = sol {
                let set = IndependentSet::new(nodes, &inst).map_err(relabel)?;
                inst.set_label(set).map_err(relabel)?;
            }
            Ok(Instance::Mis(inst))
        }
        other => Err(toks.err(format!("unknown instance kind `{other}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{generate_er, generate_tsp};
    use proptest::prelude::*;

    #[test]
    fn round_trip_with_labels() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("set.txt");
        let mut t = generate_tsp(6, 1).unwrap();
        let tour = Tour::new(vec![0, 2, 4, 1, 3, 5], t.coords()).unwrap();
        t.set_label(tour).unwrap();
        let mut g = generate_er(8, 8, 0.3, 2).unwrap();
        g.id = 1;
        let set = IndependentSet::new(vec![], &g).unwrap();
        g.set_label(set).unwrap();
        let insts = vec![Instance::Tsp(t), Instance::Mis(g)];
        save_instances(&path, &insts).unwrap();
        assert_eq!(load_instances(&path).unwrap(), insts);
    }

    #[test]
    fn non_numeric_coordinate_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.txt");
        fs::write(&path, "tsp 2 0.1 0.2 0.3 0.4\n# comment\ntsp 2 0.1 abc 0.3 0.4\n").unwrap();
        match load_instances(&path) {
            Err(InstanceError::Parse { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("abc"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn external_coordinate_list_loads() {
        let inst = parse_instance("tsp 3 0 0 1 0 0.5 0.75 sol 2 1 0", 1, 0).unwrap();
        let Instance::Tsp(t) = inst else { panic!("expected tsp") };
        assert_eq!(t.n(), 3);
        assert_eq!(t.coords()[2], [0.5, 0.75]);
        assert_eq!(t.label().unwrap().order(), &[2, 1, 0]);
    }

    #[test]
    fn rejects_structural_errors() {
        assert!(parse_instance("tsp 3 0 0 1 0", 4, 0).is_err());
        assert!(parse_instance("tsp 2 0 0 1 0 extra", 4, 0).is_err());
        assert!(parse_instance("tsp 2 0 0 1 0 sol 0 0", 4, 0).is_err());
        assert!(parse_instance("mis 3 1 0 0", 4, 0).is_err());
        assert!(parse_instance("mis 3 1 0 1 sol 0 1", 4, 0).is_err());
        assert!(parse_instance("graph 3", 4, 0).is_err());
        match parse_instance("tsp 2 0 0 2 0", 9, 0) {
            Err(InstanceError::Parse { line: 9, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    fn arb_instance() -> impl Strategy<Value = Instance> {
        prop_oneof![
            (2usize..12, any::<u64>(), any::<bool>()).prop_map(|(n, seed, labeled)| {
                let mut t = generate_tsp(n, seed).unwrap();
                if labeled {
                    let order: Vec<usize> = (0..n).rev().collect();
                    let tour = Tour::new(order, t.coords()).unwrap();
                    t.set_label(tour).unwrap();
                }
                Instance::Tsp(t)
            }),
            (2usize..15, 0.0f64..1.0, any::<u64>(), any::<bool>()).prop_map(|(n, p, seed, labeled)| {
                let mut g = generate_er(n, n, p, seed).unwrap();
                if labeled {
                    let set = crate::oracle::solve_mis_heuristic(&g, seed).solution;
                    g.set_label(set).unwrap();
                }
                Instance::Mis(g)
            }),
        ]
    }

    proptest! {
        #[test]
        fn format_parse_is_identity(insts in proptest::collection::vec(arb_instance(), 1..6)) {
            let mut insts = insts;
            for (i, inst) in insts.iter_mut().enumerate() {
                inst.set_id(i);
            }
            let text: Vec<String> = insts.iter().map(format_instance).collect();
            let parsed: Vec<Instance> = text
                .iter()
                .enumerate()
                .map(|(i, line)| parse_instance(line, i + 1, i).unwrap())
                .collect();
            prop_assert_eq!(parsed, insts);
        }
    }
}
