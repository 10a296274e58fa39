//! Parameterized molecular geometries in Angstrom, emitted as XYZ text for
//! external Hamiltonian generation.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Molecule {
    H2O,
    H4,
    NH3,
    C6H6,
}

impl Molecule {
    pub fn name(self) -> &'static str {
        match self {
            Molecule::H2O => "H2O",
            Molecule::H4 => "H4",
            Molecule::NH3 => "NH3",
            Molecule::C6H6 => "C6H6",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Molecule::H2O, Molecule::H4, Molecule::NH3, Molecule::C6H6]
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub element: String,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

fn atom(element: &str, x: f64, y: f64, z: f64) -> Atom {
    Atom {
        element: element.to_string(),
        x,
        y,
        z,
    }
}

/// H-O-H angle in degrees.
pub const WATER_ANGLE_DEG: f64 = 104.5;

/// Coordinates as a function of the distortion `d`: O-H length for water,
/// spacing for the chain, N height for ammonia and the H1 displacement along
/// C1-H1 for benzene.
pub fn geometry(molecule: Molecule, d: f64) -> Vec<Atom> {
    match molecule {
        Molecule::H2O => {
            let half = (WATER_ANGLE_DEG / 2.0).to_radians();
            vec![
                atom("O", 0.0, 0.0, 0.0),
                atom("H", d * half.sin(), 0.0, d * half.cos()),
                atom("H", -d * half.sin(), 0.0, d * half.cos()),
            ]
        }
        Molecule::H4 => (0..4).map(|i| atom("H", i as f64 * d, 0.0, 0.0)).collect(),
        Molecule::NH3 => {
            let s = 3f64.sqrt() / 2.0;
            vec![
                atom("N", 0.0, 0.0, d),
                atom("H", 1.0, 0.0, 0.0),
                atom("H", -0.5, s, 0.0),
                atom("H", -0.5, -s, 0.0),
            ]
        }
        Molecule::C6H6 => vec![
            atom("C", 1.3970, 0.0, 0.0),
            atom("C", 0.6985, 1.2098, 0.0),
            atom("C", -0.6985, 1.2098, 0.0),
            atom("C", -1.3970, 0.0, 0.0),
            atom("C", -0.6985, -1.2098, 0.0),
            atom("C", 0.6985, -1.2098, 0.0),
            atom("H", 2.4810 + d, 0.0, 0.0),
            atom("H", 1.2405, 2.1486, 0.0),
            atom("H", -1.2405, 2.1486, 0.0),
            atom("H", -2.4810, 0.0, 0.0),
            atom("H", -1.2405, -2.1486, 0.0),
            atom("H", 1.2405, -2.1486, 0.0),
        ],
    }
}

/// Standard XYZ: atom count, comment line, one atom per line.
pub fn to_xyz(atoms: &[Atom], comment: &str) -> String {
    let mut out = format!("{}\n{}\n", atoms.len(), comment);
    for a in atoms {
        let _ = writeln!(out, "{:<2} {:>14.8} {:>14.8} {:>14.8}", a.element, a.x, a.y, a.z);
    }
    out
}
