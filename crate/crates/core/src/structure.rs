//! PQR structure parsing and element-specific atom selection.
//!
//! A PQR record is whitespace-delimited:
//!
//! ```text
//! ATOM  serial name resName [chainID] resSeq x y z charge radius
//! ```
//!
//! Records with ten fields carry no chain id; records with eleven fields carry one between
//! the residue name and the residue number. `HETATM` records are parsed exactly like `ATOM`.
//! Every other line (`REMARK`, `TER`, `END`, ...) is skipped.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Element {
    C,
    N,
    O,
    S,
    H,
    Other,
}

impl Element {
    /// Infers the element from a PQR atom name: leading digits are stripped and the first
    /// alphabetic character decides (`CA` -> C, `1HB` -> H, `OXT` -> O).
    pub fn from_atom_name(name: &str) -> Self {
        let first = name
            .trim_start_matches(|c: char| c.is_ascii_digit())
            .chars()
            .find(|c| c.is_ascii_alphabetic());
        match first.map(|c| c.to_ascii_uppercase()) {
            Some('C') => Element::C,
            Some('N') => Element::N,
            Some('O') => Element::O,
            Some('S') => Element::S,
            Some('H') => Element::H,
            _ => Element::Other,
        }
    }

    pub fn is_heavy(self) -> bool {
        matches!(self, Element::C | Element::N | Element::O | Element::S)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub serial: i64,
    pub name: String,
    pub residue_name: String,
    pub residue_seq: i64,
    /// Position in Å.
    pub position: [f64; 3],
    /// Partial charge in elementary charge units.
    pub charge: f64,
    /// Radius in Å.
    pub radius: f64,
    pub element: Element,
}

impl Atom {
    /// Minimal constructor for synthetic atoms; the element comes from `name`.
    pub fn new(serial: i64, name: &str, position: [f64; 3], charge: f64, radius: f64) -> Self {
        Atom {
            serial,
            name: name.to_string(),
            residue_name: "UNK".to_string(),
            residue_seq: 1,
            position,
            charge,
            radius,
            element: Element::from_atom_name(name),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AtomSelector {
    AllCarbon,
    AllHeavy,
    All,
}

impl AtomSelector {
    pub fn matches(self, element: Element) -> bool {
        match self {
            AtomSelector::AllCarbon => element == Element::C,
            AtomSelector::AllHeavy => element.is_heavy(),
            AtomSelector::All => true,
        }
    }
}

/// An immutable, non-empty list of atoms read from one PQR file.
#[derive(Debug, Clone, PartialEq)]
pub struct ProteinStructure {
    atoms: Vec<Atom>,
    pub source_path: String,
    pub id: String,
}

impl ProteinStructure {
    /// Wraps an atom list, enforcing non-emptiness and unique serials.
    pub fn new(id: impl Into<String>, atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::EmptyStructure);
        }
        let mut seen = HashMap::with_capacity(atoms.len());
        for (index, atom) in atoms.iter().enumerate() {
            if seen.insert(atom.serial, index).is_some() {
                return Err(Error::DuplicateSerial {
                    serial: atom.serial,
                    line: index + 1,
                });
            }
        }
        Ok(ProteinStructure {
            atoms,
            source_path: String::new(),
            id: id.into(),
        })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn select_atoms(&self, selector: AtomSelector) -> Result<Vec<[f64; 3]>> {
        select_atoms(self, selector)
    }
}

fn parse_field<T: std::str::FromStr>(token: &str, what: &str, line: usize) -> Result<T> {
    token
        .parse()
        .map_err(|_| Error::parse(line, format!("invalid {what} {token:?}")))
}

fn parse_coordinate(token: &str, what: &str, line: usize) -> Result<f64> {
    let value: f64 = parse_field(token, what, line)?;
    if !value.is_finite() {
        return Err(Error::parse(line, format!("non-finite {what} {token:?}")));
    }
    Ok(value)
}

fn parse_record(fields: &[&str], line: usize) -> Result<Atom> {
    // Eleven fields: chain id sits between residue name and residue number.
    let rest = match fields.len() {
        10 => &fields[4..],
        11 => &fields[5..],
        n => {
            return Err(Error::parse(
                line,
                format!("expected 10 or 11 fields, found {n}"),
            ))
        }
    };
    let serial = parse_field(fields[1], "serial", line)?;
    let name = fields[2].to_string();
    let residue_name = fields[3].to_string();
    let residue_seq = parse_field(rest[0], "residue number", line)?;
    let position = [
        parse_coordinate(rest[1], "x coordinate", line)?,
        parse_coordinate(rest[2], "y coordinate", line)?,
        parse_coordinate(rest[3], "z coordinate", line)?,
    ];
    let charge = parse_coordinate(rest[4], "charge", line)?;
    let radius = parse_coordinate(rest[5], "radius", line)?;
    if radius < 0.0 {
        return Err(Error::parse(line, format!("negative radius {radius}")));
    }
    let element = Element::from_atom_name(&name);
    Ok(Atom {
        serial,
        name,
        residue_name,
        residue_seq,
        position,
        charge,
        radius,
        element,
    })
}

/// Parses PQR text into a structure. Line numbers in errors are 1-based.
pub fn parse_pqr<R: BufRead>(reader: R, id: &str) -> Result<ProteinStructure> {
    let mut atoms = Vec::new();
    let mut serial_lines: HashMap<i64, usize> = HashMap::new();
    for (index, line) in reader.lines().enumerate() {
        let line_no = index + 1;
        let line = line.map_err(|e| Error::parse(line_no, e.to_string()))?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.first() {
            Some(&"ATOM") | Some(&"HETATM") => {}
            _ => continue,
        }
        let atom = parse_record(&fields, line_no)?;
        if serial_lines.insert(atom.serial, line_no).is_some() {
            return Err(Error::DuplicateSerial {
                serial: atom.serial,
                line: line_no,
            });
        }
        atoms.push(atom);
    }
    if atoms.is_empty() {
        return Err(Error::EmptyStructure);
    }
    Ok(ProteinStructure {
        atoms,
        source_path: String::new(),
        id: id.to_string(),
    })
}

pub fn parse_pqr_str(text: &str, id: &str) -> Result<ProteinStructure> {
    parse_pqr(text.as_bytes(), id)
}

/// Reads a PQR file; the structure id is the file stem.
pub fn read_pqr(path: &Path) -> Result<ProteinStructure> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut structure = parse_pqr(std::io::BufReader::new(file), &id)?;
    structure.source_path = path.display().to_string();
    Ok(structure)
}

/// Writes the atom list as ten-field PQR records (3 decimals for coordinates, 4 for charge
/// and radius).
pub fn write_pqr(structure: &ProteinStructure) -> String {
    let mut out = String::new();
    for atom in structure.atoms() {
        let [x, y, z] = atom.position;
        let _ = writeln!(
            out,
            "ATOM {:>6} {:<4} {:<4} {:>5} {:>9.3} {:>9.3} {:>9.3} {:>8.4} {:>7.4}",
            atom.serial,
            atom.name,
            atom.residue_name,
            atom.residue_seq,
            x,
            y,
            z,
            atom.charge,
            atom.radius
        );
    }
    out.push_str("END\n");
    out
}

/// Positions of the atoms accepted by `selector`, in file order.
pub fn select_atoms(structure: &ProteinStructure, selector: AtomSelector) -> Result<Vec<[f64; 3]>> {
    let points: Vec<[f64; 3]> = structure
        .atoms()
        .iter()
        .filter(|a| selector.matches(a.element))
        .map(|a| a.position)
        .collect();
    if points.is_empty() {
        return Err(Error::EmptySelection(selector));
    }
    Ok(points)
}
