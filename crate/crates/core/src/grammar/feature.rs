//! Feature structures and unification.
//!
//! Structures are finite maps from feature names to atoms, variables or
//! nested structures. Variables are shared only within one rule instance;
//! a fresh [`Bindings`] is used per rule application.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Value {
    Atom(String),
    Var(String),
    Fs(FeatureStructure),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FeatureStructure(BTreeMap<String, Value>);

impl FeatureStructure {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn get(&self, feature: &str) -> Option<&Value> {
        self.0.get(feature)
    }

    /// Atom value of `feature`, if it is bound to an atom.
    pub fn atom(&self, feature: &str) -> Option<&str> {
        match self.0.get(feature) {
            Some(Value::Atom(a)) => Some(a),
            _ => None,
        }
    }

    pub fn insert(&mut self, feature: impl Into<String>, value: Value) {
        self.0.insert(feature.into(), value);
    }

    pub fn with(mut self, feature: &str, value: Value) -> Self {
        self.insert(feature, value);
        self
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Value)> {
        self.0.iter()
    }

    /// Parse the bracketed surface syntax `[f=v,g=[h=X]]`. Identifiers
    /// starting with an uppercase letter are variables.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut p = FsParser {
            s: text.as_bytes(),
            pos: 0,
        };
        p.skip_ws();
        let fs = p.structure()?;
        p.skip_ws();
        if p.pos != p.s.len() {
            return Err(format!("trailing input after feature structure: {:?}", &text[p.pos..]));
        }
        Ok(fs)
    }

    pub fn has_vars(&self) -> bool {
        self.0.values().any(|v| match v {
            Value::Var(_) => true,
            Value::Fs(f) => f.has_vars(),
            Value::Atom(_) => false,
        })
    }

    /// Copy with every variable renamed by `f`.
    pub fn rename_vars(&self, f: &mut impl FnMut(&str) -> String) -> Self {
        FeatureStructure(
            self.0
                .iter()
                .map(|(k, v)| {
                    let v = match v {
                        Value::Var(x) => Value::Var(f(x)),
                        Value::Fs(fs) => Value::Fs(fs.rename_vars(f)),
                        Value::Atom(a) => Value::Atom(a.clone()),
                    };
                    (k.clone(), v)
                })
                .collect(),
        )
    }

    /// Copy with variable-valued features removed (at any depth). Used to
    /// ground passive parse edges.
    pub fn without_vars(&self) -> Self {
        let mut out = BTreeMap::new();
        for (k, v) in &self.0 {
            match v {
                Value::Var(_) => {}
                Value::Atom(a) => {
                    out.insert(k.clone(), Value::Atom(a.clone()));
                }
                Value::Fs(fs) => {
                    out.insert(k.clone(), Value::Fs(fs.without_vars()));
                }
            }
        }
        FeatureStructure(out)
    }

    /// Variables in left-to-right (sorted key) first-occurrence order.
    pub fn collect_vars(&self, out: &mut Vec<String>) {
        for v in self.0.values() {
            match v {
                Value::Var(x) => {
                    if !out.contains(x) {
                        out.push(x.clone());
                    }
                }
                Value::Fs(fs) => fs.collect_vars(out),
                Value::Atom(_) => {}
            }
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Atom(a) | Value::Var(a) => f.write_str(a),
            Value::Fs(fs) => write!(f, "{fs}"),
        }
    }
}

impl fmt::Display for FeatureStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, (k, v)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{k}={v}")?;
        }
        f.write_str("]")
    }
}

pub fn atom(s: &str) -> Value {
    Value::Atom(s.to_string())
}

pub fn var(s: &str) -> Value {
    Value::Var(s.to_string())
}

fn is_var_name(s: &str) -> bool {
    s.chars().next().is_some_and(|c| c.is_ascii_uppercase())
}

struct FsParser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl FsParser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), String> {
        self.skip_ws();
        if self.s.get(self.pos) == Some(&c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(format!("expected '{}' at offset {}", c as char, self.pos))
        }
    }

    fn ident(&mut self) -> Result<String, String> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.s.len() {
            let c = self.s[self.pos];
            if c.is_ascii_alphanumeric() || matches!(c, b'_' | b'*' | b'-' | b'+' | b'\'') {
                self.pos += 1;
            } else {
                break;
            }
        }
        if start == self.pos {
            return Err(format!("expected identifier at offset {}", start));
        }
        Ok(String::from_utf8_lossy(&self.s[start..self.pos]).into_owned())
    }

    fn structure(&mut self) -> Result<FeatureStructure, String> {
        self.expect(b'[')?;
        let mut fs = FeatureStructure::new();
        self.skip_ws();
        if self.s.get(self.pos) == Some(&b']') {
            self.pos += 1;
            return Ok(fs);
        }
        loop {
            let name = self.ident()?;
            self.expect(b'=')?;
            self.skip_ws();
            let value = if self.s.get(self.pos) == Some(&b'[') {
                Value::Fs(self.structure()?)
            } else {
                let v = self.ident()?;
                if is_var_name(&v) {
                    Value::Var(v)
                } else {
                    Value::Atom(v)
                }
            };
            if fs.0.insert(name.clone(), value).is_some() {
                return Err(format!("duplicate feature '{name}'"));
            }
            self.skip_ws();
            match self.s.get(self.pos) {
                Some(b',') => self.pos += 1,
                Some(b']') => {
                    self.pos += 1;
                    return Ok(fs);
                }
                _ => return Err(format!("expected ',' or ']' at offset {}", self.pos)),
            }
        }
    }
}

/// Variable substitution accumulated during unification.
#[derive(Debug, Clone, Default)]
pub struct Bindings {
    map: HashMap<String, Value>,
}

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    /// Follow variable bindings. Returns the last variable on the chain
    /// (if any) together with the value it ends at.
    fn walk<'a>(&'a self, mut v: &'a Value) -> (Option<&'a str>, &'a Value) {
        let mut last = None;
        while let Value::Var(x) = v {
            last = Some(x.as_str());
            match self.map.get(x) {
                Some(next) => v = next,
                None => break,
            }
        }
        (last, v)
    }

    fn occurs(&self, x: &str, v: &Value) -> bool {
        match self.walk(v).1 {
            Value::Var(y) => x == y,
            Value::Atom(_) => false,
            Value::Fs(fs) => fs.0.values().any(|w| self.occurs(x, w)),
        }
    }

    fn unify_values(&mut self, a: &Value, b: &Value) -> Option<Value> {
        let (va, ra) = self.walk(a);
        let (vb, rb) = self.walk(b);
        let (va, vb) = (va.map(str::to_string), vb.map(str::to_string));
        let (ra, rb) = (ra.clone(), rb.clone());
        let merged = match (&ra, &rb) {
            (Value::Var(x), Value::Var(y)) => {
                if x != y {
                    self.map.insert(x.clone(), Value::Var(y.clone()));
                }
                return Some(Value::Var(y.clone()));
            }
            (Value::Var(x), other) | (other, Value::Var(x)) => {
                if self.occurs(x, other) {
                    return None;
                }
                self.map.insert(x.clone(), other.clone());
                return Some(other.clone());
            }
            (Value::Atom(p), Value::Atom(q)) => {
                if p != q {
                    return None;
                }
                return Some(ra.clone());
            }
            (Value::Fs(f), Value::Fs(g)) => Value::Fs(self.unify_fs(f, g)?),
            _ => return None,
        };
        // A variable that pointed at one of the merged structures must now
        // see the merge result.
        for v in [va, vb].into_iter().flatten() {
            self.map.insert(v, merged.clone());
        }
        Some(merged)
    }

    /// Unify two structures under the current bindings; the result is not
    /// yet substituted (see [`Bindings::apply`]).
    pub fn unify_fs(&mut self, a: &FeatureStructure, b: &FeatureStructure) -> Option<FeatureStructure> {
        let mut out = a.0.clone();
        for (k, bv) in &b.0 {
            match a.0.get(k) {
                Some(av) => {
                    let m = self.unify_values(av, bv)?;
                    out.insert(k.clone(), m);
                }
                None => {
                    out.insert(k.clone(), bv.clone());
                }
            }
        }
        Some(FeatureStructure(out))
    }

    fn apply_value(&self, v: &Value) -> Value {
        match self.walk(v).1 {
            Value::Fs(fs) => Value::Fs(self.apply(fs)),
            other => other.clone(),
        }
    }

    /// Substitute all bound variables (recursively).
    pub fn apply(&self, fs: &FeatureStructure) -> FeatureStructure {
        FeatureStructure(fs.0.iter().map(|(k, v)| (k.clone(), self.apply_value(v))).collect())
    }
}

/// Most general unifier of two structures, fully substituted; `None` on
/// clash.
pub fn unify(a: &FeatureStructure, b: &FeatureStructure) -> Option<FeatureStructure> {
    let mut env = Bindings::new();
    let merged = env.unify_fs(a, b)?;
    Some(env.apply(&merged))
}

/// Rename variables to `V1, V2, ...` in first-occurrence order across the
/// given structures. Two rule bodies that differ only by variable names
/// canonicalise identically.
pub fn canonicalize_vars(structures: &[&FeatureStructure]) -> Vec<FeatureStructure> {
    let mut order = Vec::new();
    for fs in structures {
        fs.collect_vars(&mut order);
    }
    let names: HashMap<&str, String> = order
        .iter()
        .enumerate()
        .map(|(i, v)| (v.as_str(), format!("V{}", i + 1)))
        .collect();
    structures
        .iter()
        .map(|fs| fs.rename_vars(&mut |x| names[x].clone()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fs(s: &str) -> FeatureStructure {
        FeatureStructure::parse(s).unwrap()
    }

    #[test]
    fn variable_binds_to_atom() {
        assert_eq!(unify(&fs("[num=sg]"), &fs("[num=X]")), Some(fs("[num=sg]")));
    }

    #[test]
    fn atom_clash_fails() {
        assert_eq!(unify(&fs("[num=sg]"), &fs("[num=pl]")), None);
    }

    #[test]
    fn nested_structures_merge() {
        assert_eq!(
            unify(&fs("[agr=[num=sg]]"), &fs("[agr=[per=3]]")),
            Some(fs("[agr=[num=sg,per=3]]"))
        );
    }

    #[test]
    fn shared_variable_propagates() {
        let mut env = Bindings::new();
        let a = env.unify_fs(&fs("[a=X,b=X]"), &fs("[a=sg]")).unwrap();
        assert_eq!(env.apply(&a), fs("[a=sg,b=sg]"));
        assert!(env.unify_fs(&fs("[b=X]"), &fs("[b=pl]")).is_none());
    }

    #[test]
    fn variable_bound_to_structure_sees_later_merge() {
        let mut env = Bindings::new();
        env.unify_fs(&fs("[f=X]"), &fs("[f=[num=sg]]")).unwrap();
        env.unify_fs(&fs("[f=X]"), &fs("[f=[per=3]]")).unwrap();
        assert_eq!(env.apply(&fs("[g=X]")), fs("[g=[num=sg,per=3]]"));
    }

    #[test]
    fn occurs_check_rejects_cycles() {
        assert_eq!(unify(&fs("[f=X]"), &fs("[f=[g=X]]")), None);
    }

    #[test]
    fn parse_and_display_round_trip() {
        let s = "[agr=[num=sg,per=3],case=C,wh=no]";
        assert_eq!(fs(s).to_string(), s);
        assert!(FeatureStructure::parse("[a=b").is_err());
        assert!(FeatureStructure::parse("[a=b,a=c]").is_err());
    }

    #[test]
    fn canonical_names_ignore_original_names() {
        let a = canonicalize_vars(&[&fs("[num=Q]"), &fs("[agr=Z,num=Q]")]);
        let b = canonicalize_vars(&[&fs("[num=X]"), &fs("[agr=Y,num=X]")]);
        assert_eq!(a, b);
        assert_eq!(a[1].to_string(), "[agr=V2,num=V1]");
    }

    #[test]
    fn without_vars_drops_unbound() {
        assert_eq!(fs("[a=X,b=sg,c=[d=Y,e=f]]").without_vars(), fs("[b=sg,c=[e=f]]"));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn value() -> impl Strategy<Value = Value> {
            let leaf = prop_oneof![
                prop_oneof![Just("sg"), Just("pl"), Just("x")].prop_map(atom),
                prop_oneof![Just("X"), Just("Y")].prop_map(var),
            ];
            leaf.prop_recursive(2, 8, 3, |inner| {
                proptest::collection::btree_map(prop_oneof![Just("a"), Just("b")].prop_map(String::from), inner, 0..3)
                    .prop_map(|m| Value::Fs(FeatureStructure(m)))
            })
        }

        fn structure() -> impl Strategy<Value = FeatureStructure> {
            proptest::collection::btree_map(
                prop_oneof![Just("num"), Just("agr"), Just("case")].prop_map(String::from),
                value(),
                0..3,
            )
            .prop_map(FeatureStructure)
        }

        proptest! {
            #[test]
            fn unification_is_commutative_on_success(a in structure(), b in structure()) {
                let ab = unify(&a, &b);
                let ba = unify(&b, &a);
                prop_assert_eq!(ab.is_some(), ba.is_some());
                if let (Some(x), Some(y)) = (ab, ba) {
                    let cx = canonicalize_vars(&[&x]);
                    let cy = canonicalize_vars(&[&y]);
                    // Equal up to variable naming: compare ground parts and shapes.
                    prop_assert_eq!(cx[0].without_vars(), cy[0].without_vars());
                }
            }

            #[test]
            fn unification_is_idempotent(a in structure(), b in structure()) {
                if let Some(u) = unify(&a, &b) {
                    let again = unify(&u, &b).expect("unifier still unifies with its input");
                    prop_assert_eq!(again.without_vars(), u.without_vars());
                }
            }
        }
    }
}
