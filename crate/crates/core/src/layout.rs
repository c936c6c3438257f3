//! Entanglement layouts as directed multigraphs.
//!
//! Qubits are vertices and each `CNOT` is a directed edge `control → target`.
//! All `n(n-1)` possible edges are enumerated in a fixed row-major order and a
//! layout with `k` gates is the ordered vector of the `k` edge indices it
//! uses. Gate order matters, so two genotypes with the same edges in a
//! different order are different layouts.

use num_bigint::BigUint;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::Gate;

/// A directed edge `source → destination` (control → target).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub source: usize,
    pub destination: usize,
}

/// All off-diagonal edges of an `n`-vertex graph, ascending by
/// `(source, destination)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeSet {
    n_qubits: usize,
    edges: Vec<Edge>,
}

impl EdgeSet {
    pub fn new(n_qubits: usize) -> Result<Self> {
        if n_qubits < 2 {
            return Err(Error::TooFewQubits(n_qubits));
        }
        let edges = (0..n_qubits)
            .flat_map(|s| {
                (0..n_qubits).filter(move |d| *d != s).map(move |d| Edge {
                    source: s,
                    destination: d,
                })
            })
            .collect();
        Ok(Self { n_qubits, edges })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// `E = n(n-1)`.
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn get(&self, index: usize) -> Result<Edge> {
        self.edges.get(index).copied().ok_or(Error::EdgeOutOfRange {
            index,
            edges: self.edges.len(),
        })
    }

    /// Canonical index of `source → destination`.
    pub fn index_of(&self, source: usize, destination: usize) -> Result<usize> {
        let n = self.n_qubits;
        if source >= n || destination >= n {
            return Err(Error::QubitOutOfRange {
                index: source.max(destination),
                n_qubits: n,
            });
        }
        if source == destination {
            return Err(Error::SameControlTarget(source));
        }
        Ok(source * (n - 1) + destination - usize::from(destination > source))
    }
}

/// Ordered vector of distinct edge indices; its length is the entanglement
/// level `k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Genotype(Vec<usize>);

impl Genotype {
    /// Validates entries against an edge count `E`.
    pub fn new(entries: Vec<usize>, n_edges: usize) -> Result<Self> {
        let g = Genotype(entries);
        g.validate(n_edges)?;
        Ok(g)
    }

    /// No validation; callers must ensure entries are distinct and in range.
    pub(crate) fn from_raw(entries: Vec<usize>) -> Self {
        Genotype(entries)
    }

    pub fn validate(&self, n_edges: usize) -> Result<()> {
        let mut seen = vec![false; n_edges];
        for &e in &self.0 {
            if e >= n_edges {
                return Err(Error::EdgeOutOfRange {
                    index: e,
                    edges: n_edges,
                });
            }
            if std::mem::replace(&mut seen[e], true) {
                return Err(Error::DuplicateEdge(e));
            }
        }
        Ok(())
    }

    pub fn entries(&self) -> &[usize] {
        &self.0
    }

    pub fn k(&self) -> usize {
        self.0.len()
    }

    /// The gate sequence this genotype encodes, in order.
    pub fn decode(&self, edges: &EdgeSet) -> Result<Vec<Gate>> {
        self.0
            .iter()
            .map(|&i| {
                edges.get(i).map(|e| Gate::Cnot {
                    control: e.source,
                    target: e.destination,
                })
            })
            .collect()
    }

    /// Recovers a genotype from a `CNOT` sequence.
    pub fn encode(gates: &[Gate], edges: &EdgeSet) -> Result<Self> {
        let entries = gates
            .iter()
            .map(|g| match *g {
                Gate::Cnot { control, target } => edges.index_of(control, target),
                Gate::Ry { .. } => Err(Error::Config(
                    "only CNOT gates can be encoded as edges".into(),
                )),
            })
            .collect::<Result<Vec<_>>>()?;
        Genotype::new(entries, edges.len())
    }

    /// Adjacency matrix of the layout; gate order is dropped.
    pub fn to_adjacency(&self, edges: &EdgeSet) -> Result<AdjacencyMatrix> {
        let n = edges.n_qubits();
        let mut m = vec![vec![0u8; n]; n];
        for &i in &self.0 {
            let e = edges.get(i)?;
            m[e.source][e.destination] = 1;
        }
        Ok(AdjacencyMatrix(m))
    }
}

impl std::fmt::Display for Genotype {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[")?;
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, "]")
    }
}

/// `n × n` 0/1 matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdjacencyMatrix(pub Vec<Vec<u8>>);

impl AdjacencyMatrix {
    pub fn ones(&self) -> usize {
        self.0.iter().flatten().filter(|v| **v == 1).count()
    }
}

/// On-disk form of a genotype: `{"n_qubits": 4, "k": 2, "genotype": [0, 11]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenotypeRecord {
    pub n_qubits: usize,
    pub k: usize,
    pub genotype: Vec<usize>,
}

impl GenotypeRecord {
    pub fn new(genotype: &Genotype, n_qubits: usize) -> Self {
        Self {
            n_qubits,
            k: genotype.k(),
            genotype: genotype.entries().to_vec(),
        }
    }

    /// Checks the record against its own `n_qubits`/`k` and returns the genotype.
    pub fn into_genotype(self) -> Result<Genotype> {
        if self.k != self.genotype.len() {
            return Err(Error::GenotypeLength {
                expected: self.k,
                actual: self.genotype.len(),
            });
        }
        let edges = EdgeSet::new(self.n_qubits)?;
        Genotype::new(self.genotype, edges.len())
    }
}

/// `E!/(E-k)!`: ordered selections of `k` distinct edges.
pub fn reduced_space_size(n_qubits: usize, k: usize) -> Result<BigUint> {
    let e = EdgeSet::new(n_qubits)?.len();
    if k > e {
        return Err(Error::LevelTooLarge { k, edges: e });
    }
    Ok(((e - k + 1)..=e).fold(BigUint::from(1u32), |acc, f| acc * BigUint::from(f)))
}

/// `Σ_{k=0}^{E} E!/(E-k)!`: every layout with up to `E` gates.
pub fn full_space_size(n_qubits: usize) -> Result<BigUint> {
    let e = EdgeSet::new(n_qubits)?.len();
    // Horner form: 1 + E(1 + (E-1)(1 + ... (1 + 1·1)))
    Ok((1..=e).fold(BigUint::from(1u32), |acc, f| {
        BigUint::from(1u32) + acc * BigUint::from(f)
    }))
}

/// Uniform draw from the `E!/(E-k)!` ordered distinct-index vectors
/// (a partial Fisher-Yates shuffle).
pub fn random_genotype<R: Rng + ?Sized>(
    n_qubits: usize,
    k: usize,
    rng: &mut R,
) -> Result<Genotype> {
    let e = EdgeSet::new(n_qubits)?.len();
    if k > e {
        return Err(Error::LevelTooLarge { k, edges: e });
    }
    let mut pool: Vec<usize> = (0..e).collect();
    let (chosen, _) = pool.partial_shuffle(rng, k);
    Ok(Genotype(chosen.to_vec()))
}

/// Hand-designed ring layouts used as baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ring {
    /// `i → i+1 (mod n)`.
    Ring1,
    /// `i → i+2 (mod n)`.
    Ring2,
}

impl Ring {
    pub fn stride(self) -> usize {
        match self {
            Ring::Ring1 => 1,
            Ring::Ring2 => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Ring::Ring1 => "ring1",
            Ring::Ring2 => "ring2",
        }
    }
}

impl std::str::FromStr for Ring {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ring1" => Ok(Ring::Ring1),
            "ring2" => Ok(Ring::Ring2),
            other => Err(Error::Config(format!(
                "unknown baseline `{other}` (expected ring1 or ring2)"
            ))),
        }
    }
}

/// The ring baseline on `n` qubits: qubit `i` controls `i + stride (mod n)`.
pub fn ring_genotype(n_qubits: usize, ring: Ring) -> Result<Genotype> {
    let edges = EdgeSet::new(n_qubits)?;
    if ring == Ring::Ring2 && n_qubits < 3 {
        return Err(Error::Config("ring2 needs at least 3 qubits".into()));
    }
    let entries = (0..n_qubits)
        .map(|i| edges.index_of(i, (i + ring.stride()) % n_qubits))
        .collect::<Result<Vec<_>>>()?;
    // n = 2 makes ring1 the pair (0→1, 1→0); larger rings never repeat.
    Genotype::new(entries, edges.len())
}

/// A level-`k` layout that starts from the stride-1 ring, continues with the
/// stride-2 ring, and fills any remaining slots in canonical order. Used to
/// seed searches at levels other than `n`.
pub fn ring_seeded_genotype(n_qubits: usize, k: usize) -> Result<Genotype> {
    let edges = EdgeSet::new(n_qubits)?;
    if k > edges.len() {
        return Err(Error::LevelTooLarge {
            k,
            edges: edges.len(),
        });
    }
    let mut entries = ring_genotype(n_qubits, Ring::Ring1)?.0;
    if n_qubits >= 3 {
        entries.extend(ring_genotype(n_qubits, Ring::Ring2)?.0);
    }
    entries.extend(0..edges.len());
    let mut seen = vec![false; edges.len()];
    entries.retain(|&e| !std::mem::replace(&mut seen[e], true));
    entries.truncate(k);
    Ok(Genotype(entries))
}
