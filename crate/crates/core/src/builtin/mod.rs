//! Built-in ADTs: STACK, SET, REAL and BOOLEAN.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::adt::AdtSpec;
use crate::commutativity::OutCommutEntry;
use crate::error::AdtError;
use crate::value::{Item, Report, Value};

pub mod boolean;
pub mod real;
pub mod set;
pub mod stack;

pub const BUILTIN_NAMES: [&str; 4] = ["stack", "set", "real", "boolean"];

/// Builds the named built-in spec.
pub fn register_builtin(name: &str) -> Result<AdtSpec, AdtError> {
    match name {
        "stack" => Ok(stack::spec()),
        "set" => Ok(set::spec()),
        "real" => Ok(real::spec()),
        "boolean" => Ok(boolean::spec()),
        other => Err(AdtError::UnknownAdt(other.to_string())),
    }
}

/// ADT specs by name.
#[derive(Clone, Debug, Default)]
pub struct Registry {
    specs: BTreeMap<String, Arc<AdtSpec>>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    /// A registry holding every built-in ADT.
    pub fn builtin() -> Self {
        let mut reg = Registry::new();
        for name in BUILTIN_NAMES {
            reg.register(register_builtin(name).expect("built-in"));
        }
        reg
    }

    /// Registers (or replaces) a spec under its own name.
    pub fn register(&mut self, spec: AdtSpec) -> Arc<AdtSpec> {
        let spec = Arc::new(spec);
        self.specs.insert(spec.name.to_string(), spec.clone());
        spec
    }

    pub fn get(&self, name: &str) -> Result<Arc<AdtSpec>, AdtError> {
        self.specs
            .get(name)
            .cloned()
            .ok_or_else(|| AdtError::UnknownAdt(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.specs.keys().map(String::as_str)
    }
}

pub(crate) fn report(r: Report) -> Value {
    Value::Report(r)
}

pub(crate) fn report_is(v: &Value, r: Report) -> bool {
    v.as_report() == Some(r)
}

/// In-commutativity condition "first arguments are equal".
pub(crate) fn first_eq(a: &[Value], b: &[Value]) -> bool {
    a[0] == b[0]
}

pub(crate) fn first_ne(a: &[Value], b: &[Value]) -> bool {
    a[0] != b[0]
}

/// Out-table entries shared by single-value "register" ADTs whose private
/// interface has `READ` (out value) and `SETTO` (in value, hidden out old).
pub(crate) fn register_out_entries() -> Vec<OutCommutEntry> {
    vec![
        OutCommutEntry {
            executed: "READ",
            incoming: "READ",
            when: |_, _, _| true,
            deduce: Some(|_, outs, _| outs.to_vec()),
        },
        OutCommutEntry {
            executed: "READ",
            incoming: "SETTO",
            when: |_, outs, ins| outs[0] == ins[0],
            deduce: Some(|_, outs, _| outs.to_vec()),
        },
        OutCommutEntry {
            executed: "SETTO",
            incoming: "READ",
            when: |ins, outs, _| outs[0] == ins[0],
            deduce: Some(|ins, _, _| ins.to_vec()),
        },
        OutCommutEntry {
            executed: "SETTO",
            incoming: "SETTO",
            when: |a, outs, b| outs[0] == a[0] && b[0] == a[0],
            deduce: Some(|ins, _, _| ins.to_vec()),
        },
    ]
}

/// All sequences over `alphabet` of length `0..=max_len`, shortest first.
pub(crate) fn sequences(alphabet: &[&str], max_len: usize) -> Vec<Vec<Item>> {
    let mut all = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for seq in &frontier {
            for x in alphabet {
                let mut s: Vec<Item> = seq.clone();
                s.push(Item::new(x));
                next.push(s);
            }
        }
        all.extend(next.iter().cloned());
        frontier = next;
    }
    all
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_builtin() {
        assert_eq!(
            register_builtin("queue").unwrap_err(),
            AdtError::UnknownAdt("queue".into())
        );
        assert!(Registry::builtin().get("queue").is_err());
        assert_eq!(Registry::builtin().names().count(), 4);
    }

    #[test]
    fn sequence_counts() {
        assert_eq!(sequences(&["a", "b"], 0).len(), 1);
        assert_eq!(sequences(&["a", "b"], 2).len(), 7);
    }
}
