use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{self, c, CMat};

/// Physical single-qubit gates of the minimal composition. `I` is an idle of
/// one gate length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Primitive {
    I,
    X,
    Y,
    X90,
    Xm90,
    Y90,
    Ym90,
}

impl Primitive {
    pub const ALL: [Primitive; 7] = [
        Primitive::I,
        Primitive::X,
        Primitive::Y,
        Primitive::X90,
        Primitive::Xm90,
        Primitive::Y90,
        Primitive::Ym90,
    ];

    /// Rotation axis azimuth and angle.
    pub fn axis_angle(self) -> (f64, f64) {
        match self {
            Primitive::I => (0.0, 0.0),
            Primitive::X => (0.0, PI),
            Primitive::Y => (FRAC_PI_2, PI),
            Primitive::X90 => (0.0, FRAC_PI_2),
            Primitive::Xm90 => (PI, FRAC_PI_2),
            Primitive::Y90 => (FRAC_PI_2, FRAC_PI_2),
            Primitive::Ym90 => (-FRAC_PI_2, FRAC_PI_2),
        }
    }

    pub fn unitary(self) -> CMat {
        let (phi, angle) = self.axis_angle();
        linalg::qubit_rotation([phi.cos(), phi.sin(), 0.0], angle)
    }
}

/// Which physical decomposition a Clifford is run with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Composition {
    /// Shortest sequence of X, Y, ±X/2, ±Y/2 (1.875 gates on average).
    #[default]
    Minimal,
    /// `Z(θ3)·X/2·Z(θ2)·X/2·Z(θ1)` with virtual Z.
    U3,
}

/// One step of a composed Clifford.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Step {
    Gate(Primitive),
    VirtualZ(f64),
}

#[derive(Debug, Clone)]
pub struct Clifford {
    pub unitary: CMat,
    /// Time-ordered physical gates.
    pub minimal: Vec<Primitive>,
    /// Virtual-Z angles `[θ1, θ2, θ3]` around the two X/2 pulses.
    pub u3: [f64; 3],
}

impl Clifford {
    pub fn steps(&self, comp: Composition) -> Vec<Step> {
        match comp {
            Composition::Minimal => self.minimal.iter().map(|&p| Step::Gate(p)).collect(),
            Composition::U3 => vec![
                Step::VirtualZ(self.u3[0]),
                Step::Gate(Primitive::X90),
                Step::VirtualZ(self.u3[1]),
                Step::Gate(Primitive::X90),
                Step::VirtualZ(self.u3[2]),
            ],
        }
    }
}

/// `diag(1, e^{iθ})`.
pub fn z_unitary(theta: f64) -> CMat {
    linalg::diag_phase(&[0.0, theta])
}

/// Product of a time-ordered step list.
pub fn compose_steps(steps: &[Step]) -> CMat {
    steps.iter().fold(CMat::identity(2, 2), |acc, s| {
        let u = match s {
            Step::Gate(p) => p.unitary(),
            Step::VirtualZ(t) => z_unitary(*t),
        };
        u * acc
    })
}

/// Strips the global phase so equal operators compare equal.
fn canonical(u: &CMat) -> CMat {
    let pivot = u
        .iter()
        .copied()
        .find(|z| z.norm() > 0.5)
        .expect("unitary has an entry of magnitude ≥ 1/√2");
    u * c(pivot.norm(), 0.0) / pivot
}

pub fn equal_up_to_phase(a: &CMat, b: &CMat, tol: f64) -> bool {
    linalg::max_abs_diff(&canonical(a), &canonical(b)) < tol
}

/// The 24-element single-qubit Clifford group with its multiplication table.
#[derive(Debug, Clone)]
pub struct CliffordTable {
    pub elements: Vec<Clifford>,
    /// `mult[a][b]` is the index of `U_a·U_b` (b applied first).
    pub mult: Vec<[usize; 24]>,
    pub inverse: [usize; 24],
}

fn minimal_decompositions() -> Vec<Vec<Primitive>> {
    use Primitive::*;
    vec![
        vec![I],
        vec![X],
        vec![Y],
        vec![Y, X],
        vec![X90, Y90],
        vec![X90, Ym90],
        vec![Xm90, Y90],
        vec![Xm90, Ym90],
        vec![Y90, X90],
        vec![Y90, Xm90],
        vec![Ym90, X90],
        vec![Ym90, Xm90],
        vec![X90],
        vec![Xm90],
        vec![Y90],
        vec![Ym90],
        vec![Xm90, Y90, X90],
        vec![Xm90, Ym90, X90],
        vec![X, Y90],
        vec![X, Ym90],
        vec![Y, X90],
        vec![Y, Xm90],
        vec![X90, Y90, X90],
        vec![Xm90, Y90, Xm90],
    ]
}

fn find_u3(u: &CMat) -> [f64; 3] {
    let angles = [0.0, FRAC_PI_2, PI, 3.0 * FRAC_PI_2];
    for &t1 in &angles {
        for &t2 in &angles {
            for &t3 in &angles {
                let steps = [
                    Step::VirtualZ(t1),
                    Step::Gate(Primitive::X90),
                    Step::VirtualZ(t2),
                    Step::Gate(Primitive::X90),
                    Step::VirtualZ(t3),
                ];
                if equal_up_to_phase(&compose_steps(&steps), u, 1e-10) {
                    return [t1, t2, t3];
                }
            }
        }
    }
    unreachable!("every Clifford has a two-X/2 form with quarter-turn Z angles")
}

impl CliffordTable {
    pub fn new() -> Self {
        let elements: Vec<Clifford> = minimal_decompositions()
            .into_iter()
            .map(|minimal| {
                let steps: Vec<Step> = minimal.iter().map(|&p| Step::Gate(p)).collect();
                let unitary = compose_steps(&steps);
                let u3 = find_u3(&unitary);
                Clifford {
                    unitary,
                    minimal,
                    u3,
                }
            })
            .collect();
        assert_eq!(elements.len(), 24);
        let index_of = |u: &CMat| {
            elements
                .iter()
                .position(|e| equal_up_to_phase(&e.unitary, u, 1e-9))
                .expect("Clifford group is closed")
        };
        let mut mult = vec![[0usize; 24]; 24];
        for a in 0..24 {
            for b in 0..24 {
                mult[a][b] = index_of(&(&elements[a].unitary * &elements[b].unitary));
            }
        }
        let mut inverse = [0usize; 24];
        for a in 0..24 {
            inverse[a] = (0..24).find(|&b| mult[b][a] == 0).expect("inverse exists");
        }
        Self {
            elements,
            mult,
            inverse,
        }
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Index of the element equal to `u` up to global phase.
    pub fn index_of(&self, u: &CMat) -> Option<usize> {
        self.elements
            .iter()
            .position(|e| equal_up_to_phase(&e.unitary, u, 1e-9))
    }

    /// Average number of physical gates in the minimal composition.
    pub fn mean_minimal_length(&self) -> f64 {
        self.elements.iter().map(|e| e.minimal.len()).sum::<usize>() as f64 / self.len() as f64
    }
}

impl Default for CliffordTable {
    fn default() -> Self {
        Self::new()
    }
}

/// Random Clifford sequence with its recovery element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sequence {
    pub cliffords: Vec<usize>,
    /// Clifford applied after every random element, if interleaving.
    pub interleaved: Option<usize>,
    pub recovery: usize,
}

impl Sequence {
    /// Every Clifford index in application order, including interleaved
    /// elements and the recovery.
    pub fn elements(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.cliffords.len() * 2 + 1);
        for &c in &self.cliffords {
            out.push(c);
            if let Some(t) = self.interleaved {
                out.push(t);
            }
        }
        out.push(self.recovery);
        out
    }
}

pub fn generate_sequence<R: Rng>(table: &CliffordTable, m: usize, rng: &mut R) -> Sequence {
    generate_interleaved(table, m, None, rng)
}

pub fn generate_interleaved<R: Rng>(
    table: &CliffordTable,
    m: usize,
    interleaved: Option<usize>,
    rng: &mut R,
) -> Sequence {
    let cliffords: Vec<usize> = (0..m).map(|_| rng.random_range(0..table.len())).collect();
    let mut total = 0;
    for &c in &cliffords {
        total = table.mult[c][total];
        if let Some(t) = interleaved {
            total = table.mult[t][total];
        }
    }
    Sequence {
        cliffords,
        interleaved,
        recovery: table.inverse[total],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn table_is_a_group_of_24_distinct_elements() {
        let t = CliffordTable::new();
        for a in 0..24 {
            for b in 0..a {
                assert!(!equal_up_to_phase(&t.elements[a].unitary, &t.elements[b].unitary, 1e-6));
            }
        }
        for a in 0..24 {
            assert_eq!(t.mult[t.inverse[a]][a], 0);
            assert_eq!(t.mult[a][0], a);
        }
    }

    #[test]
    fn mean_minimal_length_is_exact() {
        assert_eq!(CliffordTable::new().mean_minimal_length(), 1.875);
    }

    #[test]
    fn both_compositions_recompose() {
        let t = CliffordTable::new();
        for e in &t.elements {
            for comp in [Composition::Minimal, Composition::U3] {
                assert!(equal_up_to_phase(&compose_steps(&e.steps(comp)), &e.unitary, 1e-10));
            }
            let xs = e
                .steps(Composition::U3)
                .iter()
                .filter(|s| matches!(s, Step::Gate(Primitive::X90)))
                .count();
            assert_eq!(xs, 2);
        }
    }

    #[test]
    fn identity_sequence_recovers_with_identity() {
        let t = CliffordTable::new();
        let seq = Sequence {
            cliffords: vec![0],
            interleaved: None,
            recovery: t.inverse[0],
        };
        assert_eq!(seq.recovery, 0);
    }

    #[test]
    fn sequences_are_deterministic_and_recompose() {
        let t = CliffordTable::new();
        let a = generate_sequence(&t, 50, &mut ChaCha8Rng::seed_from_u64(9));
        let b = generate_sequence(&t, 50, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
        let u = a
            .elements()
            .iter()
            .fold(CMat::identity(2, 2), |acc, &i| &t.elements[i].unitary * acc);
        assert!(equal_up_to_phase(&u, &CMat::identity(2, 2), 1e-10));
    }
}
