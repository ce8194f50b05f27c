//! Line-oriented netlist format for the distributed-element device model.
//!
//! One element per line, values first, `#` starts a comment:
//!
//! ```text
//! ports <node_in> <node_out> <z0_ohm>
//! cpw  <len_m> <z0_ohm> <v_m_per_s> <node_a> <node_b>
//! lser <l_h> <node_a> <node_b>
//! cap  <c_f> <node> island
//! squid <l_h>
//! ```
//!
//! `0` (or `gnd`) names the ground node and `island` is the reserved
//! transmon-island node; the island-to-ground shunt capacitor is written as
//! `cap <c_f> 0 island`. `squid` is the island-to-ground inductance.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};

/// A circuit node: ground or an index into the network's node table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Node {
    Ground,
    Index(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BranchKind {
    /// Distributed line section.
    Cpw { len_m: f64, z0: f64, v: f64 },
    /// Lumped series inductor.
    SeriesInductor { l_h: f64 },
    /// Lumped capacitor.
    Capacitor { c_f: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Branch {
    pub kind: BranchKind,
    pub a: Node,
    pub b: Node,
}

/// Node/branch description of the device with two designated ports, an
/// optional transmon island, and its linear SQUID inductance.
#[derive(Debug, Clone)]
pub struct NodalNetwork {
    /// Node names; indices match [`Node::Index`].
    pub node_names: Vec<String>,
    pub branches: Vec<Branch>,
    pub port_in: usize,
    pub port_out: usize,
    /// Port reference impedance (ohm).
    pub z0: f64,
    /// Island node index, when the netlist references one.
    pub island: Option<usize>,
    /// Island-to-ground SQUID inductance (H).
    pub squid_l: Option<f64>,
}

impl NodalNetwork {
    pub fn parse_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut names: Vec<String> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut intern = |name: &str| -> Node {
            if name == "0" || name.eq_ignore_ascii_case("gnd") {
                return Node::Ground;
            }
            let key = name.to_string();
            if let Some(&i) = index.get(&key) {
                Node::Index(i)
            } else {
                let i = names.len();
                names.push(key.clone());
                index.insert(key, i);
                Node::Index(i)
            }
        };

        let mut branches = Vec::new();
        let mut ports: Option<(Node, Node, f64)> = None;
        let mut squid_l = None;

        for (line_no, raw) in text.lines().enumerate() {
            let line = line_no + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let tok: Vec<&str> = body.split_whitespace().collect();
            let parse_num = |s: &str, what: &str| -> Result<f64> {
                s.parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    msg: format!("{what} is not a number: {s:?}"),
                })
            };
            match tok[0] {
                "ports" => {
                    if tok.len() != 4 {
                        return Err(Error::Parse {
                            line,
                            msg: "ports needs: ports <node_in> <node_out> <z0>".into(),
                        });
                    }
                    let z0 = parse_num(tok[3], "z0")?;
                    ports = Some((intern(tok[1]), intern(tok[2]), z0));
                }
                "cpw" => {
                    if tok.len() != 6 {
                        return Err(Error::Parse {
                            line,
                            msg: "cpw needs: cpw <len_m> <z0> <v> <node_a> <node_b>".into(),
                        });
                    }
                    branches.push(Branch {
                        kind: BranchKind::Cpw {
                            len_m: parse_num(tok[1], "length")?,
                            z0: parse_num(tok[2], "z0")?,
                            v: parse_num(tok[3], "phase velocity")?,
                        },
                        a: intern(tok[4]),
                        b: intern(tok[5]),
                    });
                }
                "lser" => {
                    if tok.len() != 4 {
                        return Err(Error::Parse {
                            line,
                            msg: "lser needs: lser <l_h> <node_a> <node_b>".into(),
                        });
                    }
                    branches.push(Branch {
                        kind: BranchKind::SeriesInductor {
                            l_h: parse_num(tok[1], "inductance")?,
                        },
                        a: intern(tok[2]),
                        b: intern(tok[3]),
                    });
                }
                "cap" => {
                    if tok.len() != 4 || !tok[3].eq_ignore_ascii_case("island") {
                        return Err(Error::Parse {
                            line,
                            msg: "cap needs: cap <c_f> <node> island".into(),
                        });
                    }
                    branches.push(Branch {
                        kind: BranchKind::Capacitor {
                            c_f: parse_num(tok[1], "capacitance")?,
                        },
                        a: intern(tok[2]),
                        b: intern("island"),
                    });
                }
                "squid" => {
                    if tok.len() != 2 {
                        return Err(Error::Parse {
                            line,
                            msg: "squid needs: squid <l_h>".into(),
                        });
                    }
                    intern("island");
                    squid_l = Some(parse_num(tok[1], "inductance")?);
                }
                other => {
                    return Err(Error::Parse {
                        line,
                        msg: format!("unknown element {other:?}"),
                    });
                }
            }
        }

        let (pin, pout, z0) = ports.ok_or_else(|| Error::Parse {
            line: 0,
            msg: "netlist has no ports declaration".into(),
        })?;
        let port_index = |node: Node| -> Result<usize> {
            match node {
                Node::Index(i) => Ok(i),
                Node::Ground => Err(Error::invalid_param("a port cannot sit on ground")),
            }
        };
        let net = NodalNetwork {
            island: index.get("island").copied(),
            node_names: names,
            branches,
            port_in: port_index(pin)?,
            port_out: port_index(pout)?,
            z0,
            squid_l,
        };
        net.validate()?;
        Ok(net)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.z0 > 0.0) {
            return Err(Error::invalid_param("port impedance must be positive"));
        }
        for branch in &self.branches {
            let ok = match branch.kind {
                BranchKind::Cpw { len_m, z0, v } => len_m > 0.0 && z0 > 0.0 && v > 0.0,
                BranchKind::SeriesInductor { l_h } => l_h >= 0.0,
                BranchKind::Capacitor { c_f } => c_f > 0.0,
            };
            if !ok {
                return Err(Error::invalid_param(
                    "element values must be positive (series inductors may be zero)",
                ));
            }
        }
        if let Some(l) = self.squid_l {
            if !(l > 0.0) {
                return Err(Error::invalid_param("squid inductance must be positive"));
            }
            if self.island.is_none() {
                return Err(Error::invalid_param("squid declared without an island"));
            }
        }
        // the two ports must be joined by the branch graph
        let n = self.node_names.len();
        let mut reach = vec![false; n];
        reach[self.port_in] = true;
        let mut changed = true;
        while changed {
            changed = false;
            for b in &self.branches {
                if let (Node::Index(i), Node::Index(j)) = (b.a, b.b) {
                    if reach[i] != reach[j] {
                        reach[i] = true;
                        reach[j] = true;
                        changed = true;
                    }
                }
            }
        }
        if !reach[self.port_out] {
            return Err(Error::invalid_param(
                "ports are not connected through the network",
            ));
        }
        Ok(())
    }

    /// The same network with the island branch removed: no coupling
    /// capacitors, no island shunt, no SQUID. This is the background the
    /// device response is normalized against.
    pub fn background(&self) -> NodalNetwork {
        let island = self.island;
        let branches = self
            .branches
            .iter()
            .filter(|b| {
                !matches!(b.a, Node::Index(i) if Some(i) == island)
                    && !matches!(b.b, Node::Index(i) if Some(i) == island)
            })
            .copied()
            .collect();
        NodalNetwork {
            node_names: self.node_names.clone(),
            branches,
            port_in: self.port_in,
            port_out: self.port_out,
            z0: self.z0,
            island: None,
            squid_l: None,
        }
    }

    /// The same network with a different SQUID inductance.
    pub fn with_squid(&self, l_h: f64) -> NodalNetwork {
        NodalNetwork {
            squid_l: Some(l_h),
            ..self.clone()
        }
    }

    /// The same island coupled at its first coupling point only. A single
    /// tap into a matched line radiates without interference, so the rate
    /// extracted from this network is the smooth single-point baseline that
    /// multi-point profiles are normalized against.
    pub fn single_tap_reference(&self) -> Result<NodalNetwork> {
        let island = self
            .island
            .ok_or_else(|| Error::invalid_param("network has no island"))?;
        let mut kept_tap = false;
        let branches = self
            .branches
            .iter()
            .filter(|b| {
                if !matches!(b.kind, BranchKind::Capacitor { .. }) {
                    return true;
                }
                let touches_island = matches!(b.a, Node::Index(i) if i == island)
                    || matches!(b.b, Node::Index(i) if i == island);
                if !touches_island {
                    return true;
                }
                // island shunt capacitors (to ground) always stay
                if matches!(b.a, Node::Ground) || matches!(b.b, Node::Ground) {
                    return true;
                }
                if kept_tap {
                    false
                } else {
                    kept_tap = true;
                    true
                }
            })
            .copied()
            .collect();
        if !kept_tap {
            return Err(Error::invalid_param(
                "network has no island coupling capacitor",
            ));
        }
        Ok(NodalNetwork {
            node_names: self.node_names.clone(),
            branches,
            port_in: self.port_in,
            port_out: self.port_out,
            z0: self.z0,
            island: self.island,
            squid_l: self.squid_l,
        })
    }
}
