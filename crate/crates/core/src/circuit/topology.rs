use std::collections::VecDeque;
use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Directed coupling map: a CNOT is native only along `control → target` edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeviceTopology {
    name: String,
    n_qubits: usize,
    edges: Vec<(usize, usize)>,
}

impl DeviceTopology {
    pub fn new(name: impl Into<String>, n_qubits: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        for &(c, t) in &edges {
            if c == t {
                return Err(Error::InvalidTopology(format!("self-loop on qubit {c}")));
            }
            if c >= n_qubits || t >= n_qubits {
                return Err(Error::InvalidTopology(format!("edge {c}->{t} outside 0..{n_qubits}")));
            }
        }
        let mut edges = edges;
        edges.sort_unstable();
        edges.dedup();
        Ok(DeviceTopology {
            name: name.into(),
            n_qubits,
            edges,
        })
    }

    /// All-to-all coupling in both directions; useful as an unconstrained reference.
    pub fn fully_connected(n_qubits: usize) -> Self {
        let edges = (0..n_qubits)
            .flat_map(|a| (0..n_qubits).filter(move |&b| b != a).map(move |b| (a, b)))
            .collect();
        DeviceTopology::new("fully-connected", n_qubits, edges).expect("valid by construction")
    }

    /// Five qubits with a central hub (qubit 2) coupled to the other four,
    /// plus the 0–1 and 3–4 pairs. Arrow directions follow the vendor
    /// device map; nothing downstream depends on them.
    pub fn ibmqx4_like() -> Self {
        DeviceTopology::new("ibmqx4-like", 5, vec![(1, 0), (2, 0), (2, 1), (3, 2), (3, 4), (4, 2)])
            .expect("valid preset")
    }

    /// Sixteen qubits on a 2×8 ladder.
    pub fn ibmqx5_like() -> Self {
        DeviceTopology::new(
            "ibmqx5-like",
            16,
            vec![
                (1, 0),
                (1, 2),
                (2, 3),
                (3, 4),
                (3, 14),
                (5, 4),
                (6, 5),
                (6, 7),
                (6, 11),
                (7, 10),
                (8, 7),
                (9, 8),
                (9, 10),
                (11, 10),
                (12, 5),
                (12, 11),
                (12, 13),
                (13, 4),
                (13, 14),
                (15, 0),
                (15, 2),
                (15, 14),
            ],
        )
        .expect("valid preset")
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "ibmqx4-like" => Some(Self::ibmqx4_like()),
            "ibmqx5-like" => Some(Self::ibmqx5_like()),
            _ => name
                .strip_prefix("fully-connected-")
                .and_then(|n| n.parse().ok())
                .map(Self::fully_connected),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn has_edge(&self, control: usize, target: usize) -> bool {
        self.edges.binary_search(&(control, target)).is_ok()
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.has_edge(a, b) || self.has_edge(b, a)
    }

    pub fn neighbors(&self, q: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .edges
            .iter()
            .filter_map(|&(c, t)| if c == q { Some(t) } else if t == q { Some(c) } else { None })
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Shortest undirected path from `from` to `to`, endpoints included.
    pub fn shortest_path(&self, from: usize, to: usize) -> Result<Vec<usize>> {
        let mut prev = vec![usize::MAX; self.n_qubits];
        let mut queue = VecDeque::from([from]);
        prev[from] = from;
        while let Some(q) = queue.pop_front() {
            if q == to {
                let mut path = vec![to];
                let mut cur = to;
                while cur != from {
                    cur = prev[cur];
                    path.push(cur);
                }
                path.reverse();
                return Ok(path);
            }
            for n in self.neighbors(q) {
                if prev[n] == usize::MAX {
                    prev[n] = q;
                    queue.push_back(n);
                }
            }
        }
        Err(Error::DisconnectedTopology { from, to })
    }

    pub fn is_connected(&self) -> bool {
        (1..self.n_qubits).all(|q| self.shortest_path(0, q).is_ok())
    }

    /// Edge-list text: optional `name <name>`, `qubits N`, then `control target` per line.
    pub fn to_edge_list(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "name {}", self.name);
        let _ = writeln!(s, "qubits {}", self.n_qubits);
        for (c, t) in &self.edges {
            let _ = writeln!(s, "{c} {t}");
        }
        s
    }

    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut name = String::from("custom");
        let mut n_qubits = None;
        let mut edges = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |m: String| Error::parse(format!("topology line {}", lineno + 1), m);
            let tok: Vec<&str> = line.split_whitespace().collect();
            match tok[0] {
                "name" => name = tok[1..].join(" "),
                "qubits" => {
                    let n = tok.get(1).ok_or_else(|| err("missing qubit count".into()))?;
                    n_qubits = Some(n.parse::<usize>().map_err(|e| err(e.to_string()))?);
                }
                _ => {
                    if tok.len() != 2 {
                        return Err(err(format!("expected 'control target', found '{line}'")));
                    }
                    let c = tok[0].parse::<usize>().map_err(|e| err(e.to_string()))?;
                    let t = tok[1].parse::<usize>().map_err(|e| err(e.to_string()))?;
                    edges.push((c, t));
                }
            }
        }
        let n = match n_qubits {
            Some(n) => n,
            None => edges.iter().map(|&(c, t)| c.max(t) + 1).max().unwrap_or(0),
        };
        DeviceTopology::new(name, n, edges)
    }
}
