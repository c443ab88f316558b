use super::{Circuit, DeviceTopology, Gate};
use crate::error::{Error, Result};
use crate::spin::Axis;

/// Placement of logical qubits on physical ones: `physical[l]` hosts logical `l`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub physical: Vec<usize>,
    /// Number of required interactions that are not native couplings.
    pub missing_couplings: usize,
}

impl Layout {
    pub fn trivial(n: usize) -> Layout {
        Layout {
            physical: (0..n).collect(),
            missing_couplings: 0,
        }
    }
}

const LAYOUT_SEARCH_BUDGET: usize = 2_000_000;

/// Finds a placement of `n_logical` qubits minimizing the number of
/// `interactions` that land on uncoupled physical pairs.
///
/// Exhaustive branch-and-bound over injective maps (bounded by a node
/// budget); the first optimum in lexicographic order wins, so the result is
/// deterministic.
pub fn choose_layout(n_logical: usize, interactions: &[(usize, usize)], topology: &DeviceTopology) -> Result<Layout> {
    let n_phys = topology.n_qubits();
    if n_logical > n_phys {
        return Err(Error::InvalidTopology(format!(
            "{n_logical} logical qubits do not fit on {n_phys} physical qubits"
        )));
    }
    for &(a, b) in interactions {
        if a >= n_logical || b >= n_logical {
            return Err(Error::IndexOutOfRange { index: a.max(b), limit: n_logical });
        }
    }
    let mut pairs: Vec<(usize, usize)> = interactions
        .iter()
        .filter(|(a, b)| a != b)
        .map(|&(a, b)| (a.min(b), a.max(b)))
        .collect();
    pairs.sort_unstable();
    pairs.dedup();

    // Place high-degree logical qubits first so pruning bites early.
    let mut order: Vec<usize> = (0..n_logical).collect();
    let degree = |q: usize| pairs.iter().filter(|(a, b)| *a == q || *b == q).count();
    order.sort_by_key(|&q| (std::cmp::Reverse(degree(q)), q));

    struct Search<'a> {
        topo: &'a DeviceTopology,
        pairs: &'a [(usize, usize)],
        order: &'a [usize],
        assign: Vec<Option<usize>>,
        used: Vec<bool>,
        best: Option<(usize, Vec<usize>)>,
        nodes: usize,
    }

    impl Search<'_> {
        fn cost_of(&self, logical: usize, phys: usize) -> usize {
            self.pairs
                .iter()
                .filter_map(|&(a, b)| {
                    let other = if a == logical { b } else if b == logical { a } else { return None };
                    self.assign[other].map(|p| usize::from(!self.topo.adjacent(p, phys)))
                })
                .sum()
        }

        fn go(&mut self, depth: usize, cost: usize) {
            self.nodes += 1;
            if let Some((best, _)) = &self.best {
                if cost >= *best || self.nodes > LAYOUT_SEARCH_BUDGET {
                    return;
                }
            }
            if depth == self.order.len() {
                let phys = self.assign.iter().map(|p| p.expect("complete")).collect();
                self.best = Some((cost, phys));
                return;
            }
            let logical = self.order[depth];
            for phys in 0..self.topo.n_qubits() {
                if self.used[phys] {
                    continue;
                }
                let extra = self.cost_of(logical, phys);
                self.used[phys] = true;
                self.assign[logical] = Some(phys);
                self.go(depth + 1, cost + extra);
                self.assign[logical] = None;
                self.used[phys] = false;
                if matches!(self.best, Some((0, _))) {
                    return;
                }
            }
        }
    }

    let mut search = Search {
        topo: topology,
        pairs: &pairs,
        order: &order,
        assign: vec![None; n_logical],
        used: vec![false; n_phys],
        best: None,
        nodes: 0,
    };
    search.go(0, 0);
    let (missing_couplings, physical) = search.best.expect("at least one placement exists");
    Ok(Layout {
        physical,
        missing_couplings,
    })
}

struct Router<'a> {
    topo: &'a DeviceTopology,
    out: Circuit,
    /// `pos[w]`: physical qubit currently holding wire `w`.
    pos: Vec<usize>,
    /// `wire[p]`: wire currently on physical qubit `p`.
    wire: Vec<usize>,
}

impl Router<'_> {
    fn emit(&mut self, g: Gate) -> Result<()> {
        self.out.push(g)
    }

    fn cnot(&mut self, control: usize, target: usize) -> Result<()> {
        if self.topo.has_edge(control, target) {
            self.emit(Gate::Cnot { control, target })
        } else if self.topo.has_edge(target, control) {
            for g in [Gate::H(control), Gate::H(target), Gate::Cnot { control: target, target: control }, Gate::H(control), Gate::H(target)] {
                self.emit(g)?;
            }
            Ok(())
        } else {
            Err(Error::InvalidTopology(format!("no coupling between {control} and {target}")))
        }
    }

    fn controlled(&mut self, pauli: Axis, control: usize, target: usize) -> Result<()> {
        match pauli {
            Axis::X => self.cnot(control, target),
            Axis::Z => {
                self.emit(Gate::H(target))?;
                self.cnot(control, target)?;
                self.emit(Gate::H(target))
            }
            Axis::Y => {
                self.emit(Gate::Sdg(target))?;
                self.cnot(control, target)?;
                self.emit(Gate::S(target))
            }
        }
    }

    fn swap(&mut self, a: usize, b: usize) -> Result<()> {
        self.cnot(a, b)?;
        self.cnot(b, a)?;
        self.cnot(a, b)?;
        let (wa, wb) = (self.wire[a], self.wire[b]);
        self.wire.swap(a, b);
        self.pos[wa] = b;
        self.pos[wb] = a;
        Ok(())
    }
}

/// Rewrites `circuit` (indices read as physical qubits) into single-qubit
/// gates plus CNOTs along directed `topology` edges.
///
/// Reversed CNOTs are conjugated by Hadamards, controlled-Paulis by a
/// single-qubit basis change of the target, and non-adjacent operands are
/// brought together with SWAPs (three CNOTs) along a shortest path. The SWAPs
/// are undone at the end, so the output implements the same unitary on the
/// same qubits. Controlled gates are lowered exactly, without phase slack.
pub fn transpile(circuit: &Circuit, topology: &DeviceTopology) -> Result<Circuit> {
    let n = topology.n_qubits();
    if circuit.n_qubits() > n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: circuit.n_qubits(),
        });
    }
    let mut router = Router {
        topo: topology,
        out: Circuit::new(n),
        pos: (0..n).collect(),
        wire: (0..n).collect(),
    };
    let mut swaps: Vec<(usize, usize)> = Vec::new();
    for gate in circuit.gates() {
        match *gate {
            Gate::Cnot { control, target } | Gate::ControlledPauli { control, target, .. } => {
                let target_phys = router.pos[target];
                if !topology.adjacent(router.pos[control], target_phys) {
                    let path = topology.shortest_path(router.pos[control], target_phys)?;
                    for k in 0..path.len() - 2 {
                        router.swap(path[k], path[k + 1])?;
                        swaps.push((path[k], path[k + 1]));
                    }
                }
                let (pc, pt) = (router.pos[control], router.pos[target]);
                match *gate {
                    Gate::ControlledPauli { pauli, .. } => router.controlled(pauli, pc, pt)?,
                    _ => router.cnot(pc, pt)?,
                }
            }
            _ => {
                let g = gate.remap(|q| router.pos[q]);
                router.emit(g)?;
            }
        }
    }
    for (a, b) in swaps.into_iter().rev() {
        router.swap(a, b)?;
    }
    debug_assert!(router.pos.iter().enumerate().all(|(w, &p)| w == p));
    if let Some(a) = circuit.ancilla() {
        router.out.set_ancilla(a)?;
    }
    Ok(router.out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::phase_insensitive_distance;
    use proptest::prelude::*;

    fn circuit(n: usize, gates: &[Gate]) -> Circuit {
        let mut c = Circuit::new(n);
        for g in gates {
            c.push(*g).unwrap();
        }
        c
    }

    fn only_native(c: &Circuit, t: &DeviceTopology) -> bool {
        c.gates().iter().all(|g| match *g {
            Gate::Cnot { control, target } => t.has_edge(control, target),
            Gate::ControlledPauli { .. } => false,
            _ => true,
        })
    }

    #[test]
    fn legal_circuit_is_unchanged() {
        let t = DeviceTopology::ibmqx4_like();
        let c = circuit(5, &[Gate::H(0), Gate::Cnot { control: 2, target: 0 }, Gate::Rz { qubit: 3, theta: 0.3 }, Gate::Cnot { control: 3, target: 4 }]);
        assert_eq!(transpile(&c, &t).unwrap(), c);
    }

    #[test]
    fn reversed_cnot_uses_four_hadamards() {
        let t = DeviceTopology::new("pair", 2, vec![(1, 0)]).unwrap();
        let c = circuit(2, &[Gate::Cnot { control: 0, target: 1 }]);
        let out = transpile(&c, &t).unwrap();
        assert_eq!(out.len(), 5);
        assert_eq!(out.gates().iter().filter(|g| matches!(g, Gate::H(_))).count(), 4);
        assert!(only_native(&out, &t));
        assert!(phase_insensitive_distance(&out.unitary().unwrap(), &c.unitary().unwrap()) < 1e-12);
    }

    #[test]
    fn controlled_z_is_hadamard_conjugated_cnot() {
        let t = DeviceTopology::new("pair", 2, vec![(0, 1)]).unwrap();
        let c = circuit(2, &[Gate::ControlledPauli { pauli: Axis::Z, control: 0, target: 1 }]);
        let out = transpile(&c, &t).unwrap();
        assert_eq!(out.gates(), &[Gate::H(1), Gate::Cnot { control: 0, target: 1 }, Gate::H(1)]);
        // Exact equality, not just up to phase.
        assert!((out.unitary().unwrap() - c.unitary().unwrap()).norm() < 1e-12);
    }

    #[test]
    fn controlled_y_is_exact() {
        let t = DeviceTopology::new("pair", 2, vec![(1, 0)]).unwrap();
        let c = circuit(2, &[Gate::ControlledPauli { pauli: Axis::Y, control: 0, target: 1 }]);
        let out = transpile(&c, &t).unwrap();
        assert!(only_native(&out, &t));
        assert!((out.unitary().unwrap() - c.unitary().unwrap()).norm() < 1e-12);
    }

    #[test]
    fn distant_operands_get_swaps() {
        let line = DeviceTopology::new("line", 4, vec![(0, 1), (1, 2), (2, 3)]).unwrap();
        let c = circuit(4, &[Gate::H(0), Gate::Cnot { control: 0, target: 3 }, Gate::Rx { qubit: 3, theta: 0.4 }]);
        let out = transpile(&c, &line).unwrap();
        assert!(only_native(&out, &line));
        assert!(out.cnot_count() > 2 * 2 * 3);
        assert!((out.unitary().unwrap() - c.unitary().unwrap()).norm() < 1e-10);
    }

    #[test]
    fn disconnected_topology_errors() {
        let t = DeviceTopology::new("split", 4, vec![(0, 1), (2, 3)]).unwrap();
        let c = circuit(4, &[Gate::Cnot { control: 0, target: 3 }]);
        assert!(matches!(transpile(&c, &t), Err(Error::DisconnectedTopology { .. })));
    }

    #[test]
    fn trimer_next_nearest_pair_fits_the_ladder_only() {
        // wires: spins 0,1,2 and ancilla 3; bonds 0-1, 1-2; ancilla talks to 2 and 0.
        let needs = [(0, 1), (1, 2), (3, 2), (3, 0)];
        let ladder = choose_layout(4, &needs, &DeviceTopology::ibmqx5_like()).unwrap();
        assert_eq!(ladder.missing_couplings, 0);
        let star = choose_layout(4, &needs, &DeviceTopology::ibmqx4_like()).unwrap();
        assert!(star.missing_couplings > 0);
        // Nearest-neighbour dimer correlations fit the 5-qubit device.
        let dimer = choose_layout(3, &[(0, 1), (2, 0), (2, 1)], &DeviceTopology::ibmqx4_like()).unwrap();
        assert_eq!(dimer.missing_couplings, 0);
    }

    fn random_gate(n: usize) -> impl Strategy<Value = Gate> {
        prop_oneof![
            (0..n, -4.0f64..4.0, 0..3usize).prop_map(|(q, t, a)| Gate::rotation(Axis::ALL[a], q, t)),
            (0..n, 0..6usize).prop_map(|(q, k)| [Gate::X(q), Gate::Y(q), Gate::Z(q), Gate::H(q), Gate::S(q), Gate::Sdg(q)][k]),
            (0..n, 1..n, 0..4usize).prop_map(move |(c, d, k)| {
                let t = (c + d) % n;
                if k == 3 { Gate::Cnot { control: c, target: t } } else { Gate::ControlledPauli { pauli: Axis::ALL[k], control: c, target: t } }
            }),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn transpile_preserves_unitary_on_ibmqx4(gates in prop::collection::vec(random_gate(5), 1..25)) {
            let t = DeviceTopology::ibmqx4_like();
            let c = circuit(5, &gates);
            let out = transpile(&c, &t).unwrap();
            prop_assert!(only_native(&out, &t));
            let d = phase_insensitive_distance(&out.unitary().unwrap(), &c.unitary().unwrap());
            prop_assert!(d < 1e-10, "distance {}", d);
        }

        #[test]
        fn transpile_preserves_unitary_on_line(gates in prop::collection::vec(random_gate(6), 1..20)) {
            let t = DeviceTopology::new("line6", 6, vec![(0, 1), (2, 1), (2, 3), (4, 3), (4, 5)]).unwrap();
            let c = circuit(6, &gates);
            let out = transpile(&c, &t).unwrap();
            prop_assert!(only_native(&out, &t));
            let d = phase_insensitive_distance(&out.unitary().unwrap(), &c.unitary().unwrap());
            prop_assert!(d < 1e-10, "distance {}", d);
        }
    }
}
