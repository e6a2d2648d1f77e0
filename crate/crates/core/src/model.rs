//! Features, examples, conjunctions and the hidden component representation.
//!
//! A [`Representation`] is the ground truth a teacher answers from: `m`
//! labeled components, each backed by an explicit pool of examples, plus a
//! discriminative literal for every ordered pair of differently-labeled
//! components. Learners never see it.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::de::{Deserializer, SeqAccess, Visitor};
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("feature {feature} is outside the universe of {universe} features")]
    UnknownFeature { feature: u32, universe: usize },
    #[error("example belongs to no component")]
    Uncovered,
    #[error("example belongs to differently-labeled components {0:?}")]
    AmbiguousLabel(Vec<usize>),
    #[error("component index {0} out of range")]
    UnknownComponent(usize),
    #[error("malformed world: {0}")]
    Malformed(String),
}

/// Index into the finite feature universe of one world.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureId(pub u32);

impl fmt::Display for FeatureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "f{}", self.0)
    }
}

/// A signed feature. `polarity == true` means "the feature holds".
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Literal {
    pub feature: FeatureId,
    pub polarity: bool,
}

impl Literal {
    pub const fn new(feature: u32, polarity: bool) -> Self {
        Literal {
            feature: FeatureId(feature),
            polarity,
        }
    }

    pub const fn pos(feature: u32) -> Self {
        Self::new(feature, true)
    }

    pub const fn neg(feature: u32) -> Self {
        Self::new(feature, false)
    }

    pub const fn negate(self) -> Self {
        Literal {
            feature: self.feature,
            polarity: !self.polarity,
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.polarity { '+' } else { '-' };
        write!(f, "{}{}", sign, self.feature.0)
    }
}

/// A class label. Cheap to clone.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Label(Arc<str>);

impl Label {
    pub fn new(name: &str) -> Self {
        Label(Arc::from(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Spreadsheet-style names: 0 -> "A", 25 -> "Z", 26 -> "AA".
    pub fn nth(mut index: usize) -> Self {
        let mut name = Vec::new();
        loop {
            name.push(b'A' + (index % 26) as u8);
            if index < 26 {
                break;
            }
            index = index / 26 - 1;
        }
        name.reverse();
        Label::new(std::str::from_utf8(&name).expect("ascii"))
    }
}

impl fmt::Debug for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Label {
    fn from(s: &str) -> Self {
        Label::new(s)
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Ok(Label::new(&s))
    }
}

/// A total assignment of boolean values to the feature universe.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Example {
    words: Vec<u64>,
    len: usize,
}

impl Example {
    pub fn from_bools(values: &[bool]) -> Self {
        let mut words = vec![0u64; values.len().div_ceil(64)];
        for (i, &v) in values.iter().enumerate() {
            if v {
                words[i / 64] |= 1 << (i % 64);
            }
        }
        Example {
            words,
            len: values.len(),
        }
    }

    /// Number of features in the universe this example is defined over.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn value(&self, feature: FeatureId) -> Result<bool, ModelError> {
        let i = feature.0 as usize;
        if i >= self.len {
            return Err(ModelError::UnknownFeature {
                feature: feature.0,
                universe: self.len,
            });
        }
        Ok(self.words[i / 64] >> (i % 64) & 1 == 1)
    }

    pub fn set(&mut self, feature: FeatureId, value: bool) {
        let i = feature.0 as usize;
        assert!(i < self.len, "feature {i} outside universe {}", self.len);
        if value {
            self.words[i / 64] |= 1 << (i % 64);
        } else {
            self.words[i / 64] &= !(1 << (i % 64));
        }
    }

    pub fn to_bools(&self) -> Vec<bool> {
        (0..self.len)
            .map(|i| self.words[i / 64] >> (i % 64) & 1 == 1)
            .collect()
    }

    /// Whether `literal` holds on this example.
    pub fn satisfies(&self, literal: Literal) -> Result<bool, ModelError> {
        Ok(self.value(literal.feature)? == literal.polarity)
    }
}

impl fmt::Debug for Example {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let bits: String = self
            .to_bools()
            .into_iter()
            .map(|b| if b { '1' } else { '0' })
            .collect();
        write!(f, "Example({bits})")
    }
}

impl Serialize for Example {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.to_bools())
    }
}

impl<'de> Deserialize<'de> for Example {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct Row;
        impl<'de> Visitor<'de> for Row {
            type Value = Example;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an array of booleans")
            }

            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Example, A::Error> {
                let mut values = Vec::with_capacity(seq.size_hint().unwrap_or(0));
                while let Some(v) = seq.next_element::<bool>()? {
                    values.push(v);
                }
                Ok(Example::from_bools(&values))
            }
        }
        deserializer.deserialize_seq(Row)
    }
}

/// `satisfies(x, literal)`: evaluates a literal, failing on unknown features.
pub fn satisfies(x: &Example, literal: Literal) -> Result<bool, ModelError> {
    x.satisfies(literal)
}

/// A set of literals, kept sorted by `(feature, polarity)`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Conjunction {
    literals: BTreeSet<Literal>,
}

impl Conjunction {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.literals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.literals.is_empty()
    }

    /// Returns false if the literal was already present.
    pub fn insert(&mut self, literal: Literal) -> bool {
        self.literals.insert(literal)
    }

    pub fn remove(&mut self, literal: &Literal) -> bool {
        self.literals.remove(literal)
    }

    pub fn contains(&self, literal: &Literal) -> bool {
        self.literals.contains(literal)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Literal> + '_ {
        self.literals.iter()
    }

    /// True when some feature occurs with both polarities; such a
    /// conjunction is satisfied by nothing.
    pub fn is_contradictory(&self) -> bool {
        self.literals
            .iter()
            .zip(self.literals.iter().skip(1))
            .any(|(a, b)| a.feature == b.feature)
    }

    pub fn is_subset(&self, other: &Conjunction) -> bool {
        self.literals.is_subset(&other.literals)
    }

    pub fn satisfied_by(&self, x: &Example) -> Result<bool, ModelError> {
        for &lit in &self.literals {
            if !x.satisfies(lit)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

impl FromIterator<Literal> for Conjunction {
    fn from_iter<I: IntoIterator<Item = Literal>>(iter: I) -> Self {
        Conjunction {
            literals: iter.into_iter().collect(),
        }
    }
}

impl fmt::Display for Conjunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, lit) in self.literals.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{lit}")?;
        }
        f.write_str("}")
    }
}

pub fn satisfies_conjunction(x: &Example, conj: &Conjunction) -> Result<bool, ModelError> {
    conj.satisfied_by(x)
}

pub fn negate(literal: Literal) -> Literal {
    literal.negate()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Component {
    pub label: Label,
    pub pool: Vec<Arc<Example>>,
}

/// The hidden ground truth: labeled components and the discriminative
/// literal table. `phi[(i, j)]` holds on all of component `i` and on none
/// of component `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct Representation {
    universe: usize,
    components: Vec<Component>,
    phi: BTreeMap<(usize, usize), Literal>,
}

impl Representation {
    pub fn new(
        universe: usize,
        components: Vec<Component>,
        phi: BTreeMap<(usize, usize), Literal>,
    ) -> Result<Self, ModelError> {
        if components.is_empty() {
            return Err(ModelError::Malformed("a world needs at least one component".into()));
        }
        for (c, comp) in components.iter().enumerate() {
            if let Some(x) = comp.pool.iter().find(|x| x.len() != universe) {
                return Err(ModelError::Malformed(format!(
                    "component {c} holds an example over {} features, universe is {universe}",
                    x.len()
                )));
            }
        }
        for &(i, j) in phi.keys() {
            if i >= components.len() || j >= components.len() {
                return Err(ModelError::UnknownComponent(i.max(j)));
            }
        }
        Ok(Representation {
            universe,
            components,
            phi,
        })
    }

    pub fn m(&self) -> usize {
        self.components.len()
    }

    pub fn universe(&self) -> usize {
        self.universe
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn component(&self, index: usize) -> Result<&Component, ModelError> {
        self.components
            .get(index)
            .ok_or(ModelError::UnknownComponent(index))
    }

    pub fn label(&self, index: usize) -> &Label {
        &self.components[index].label
    }

    pub fn phi(&self, i: usize, j: usize) -> Option<Literal> {
        self.phi.get(&(i, j)).copied()
    }

    pub fn phi_table(&self) -> &BTreeMap<(usize, usize), Literal> {
        &self.phi
    }

    /// Distinct labels in component order of first appearance.
    pub fn labels(&self) -> Vec<Label> {
        let mut seen = Vec::new();
        for c in &self.components {
            if !seen.contains(&c.label) {
                seen.push(c.label.clone());
            }
        }
        seen
    }

    /// Features that occur in the discriminative table.
    pub fn pair_features(&self) -> BTreeSet<FeatureId> {
        self.phi.values().map(|l| l.feature).collect()
    }

    /// Unordered differently-labeled component pairs `(i, j)` with `i < j`.
    pub fn differing_pairs(&self) -> Vec<(usize, usize)> {
        let m = self.m();
        let mut out = Vec::new();
        for i in 0..m {
            for j in i + 1..m {
                if self.components[i].label != self.components[j].label {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Components whose pool contains `x`.
    pub fn members(&self, x: &Example) -> Vec<usize> {
        self.components
            .iter()
            .enumerate()
            .filter(|(_, c)| c.pool.iter().any(|y| **y == *x))
            .map(|(i, _)| i)
            .collect()
    }

    /// The positive member of `{literal, ¬literal}`: the polarity stored
    /// for the lexicographically smallest `(i, j)`, `i < j`, using that
    /// feature; features outside the table are positive when they hold.
    pub fn positive(&self, literal: Literal) -> Literal {
        let polarity = self
            .phi
            .iter()
            .find(|(&(i, j), l)| i < j && l.feature == literal.feature)
            .map(|(_, l)| l.polarity)
            .unwrap_or(true);
        Literal {
            feature: literal.feature,
            polarity,
        }
    }

    /// Per-feature positive polarity, for handing to learners that need a
    /// fixed designation.
    pub fn designation(&self) -> Designation {
        let mut positive = BTreeMap::new();
        for (&(i, j), l) in &self.phi {
            if i < j {
                positive.entry(l.feature).or_insert(l.polarity);
            }
        }
        Designation { positive }
    }

    /// Returns `ℓ(G(x))`, requiring every component containing `x` to agree.
    pub fn concept_label(&self, x: &Example) -> Result<Label, ModelError> {
        let members = self.members(x);
        let first = *members.first().ok_or(ModelError::Uncovered)?;
        let label = self.label(first);
        if members.iter().any(|&c| self.label(c) != label) {
            return Err(ModelError::AmbiguousLabel(members));
        }
        Ok(label.clone())
    }
}

/// Which literal of each negation pair counts as "the" feature.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Designation {
    positive: BTreeMap<FeatureId, bool>,
}

impl Designation {
    pub fn positive(&self, literal: Literal) -> Literal {
        let polarity = self.positive.get(&literal.feature).copied().unwrap_or(true);
        Literal {
            feature: literal.feature,
            polarity,
        }
    }
}

pub fn concept_label(rep: &Representation, x: &Example) -> Result<Label, ModelError> {
    rep.concept_label(x)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    /// An example of the supplied pool is in no component.
    Uncovered { example: usize },
    /// A pool example has the wrong number of features.
    WrongArity { component: usize, example: usize },
    /// No table entry for a differently-labeled pair.
    MissingFeature { i: usize, j: usize },
    /// Table entry refers to a feature outside the universe.
    UnknownFeature { i: usize, j: usize },
    /// `phi[(i,j)]` fails on an example of `G_i`.
    FailsOnFirst { i: usize, j: usize, example: usize },
    /// `phi[(i,j)]` holds on an example of `G_j`.
    FailsOnSecond { i: usize, j: usize, example: usize },
    /// `phi[(j,i)] != ¬phi[(i,j)]`.
    Antisymmetry { i: usize, j: usize },
    /// A same-labeled pair carries a table entry.
    SameLabelEntry { i: usize, j: usize },
    /// An example sits in differently-labeled components.
    LabelConflict { components: Vec<usize> },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Uncovered { example } => write!(f, "cover: pool example {example} is in no component"),
            Violation::WrongArity { component, example } => {
                write!(f, "example {example} of G_{component} has the wrong arity")
            }
            Violation::MissingFeature { i, j } => {
                write!(f, "no discriminative feature for ({i},{j})")
            }
            Violation::UnknownFeature { i, j } => {
                write!(f, "discriminative feature for ({i},{j}) is outside the universe")
            }
            Violation::FailsOnFirst { i, j, example } => write!(
                f,
                "discriminative feature ({i},{j}) fails on G_{i}: example {example} does not satisfy it"
            ),
            Violation::FailsOnSecond { i, j, example } => write!(
                f,
                "discriminative feature fails on G_{j}: example {example} satisfies phi({i},{j})"
            ),
            Violation::Antisymmetry { i, j } => {
                write!(f, "antisymmetry: phi({j},{i}) is not the negation of phi({i},{j})")
            }
            Violation::SameLabelEntry { i, j } => {
                write!(f, "same-labeled pair ({i},{j}) has a table entry")
            }
            Violation::LabelConflict { components } => {
                write!(f, "example shared by differently-labeled components {components:?}")
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every axiom of the representation against its component pools
/// and against `extra`, an additional pool that must be covered.
pub fn validate_representation(rep: &Representation, extra: &[Example]) -> ValidationReport {
    let mut violations = Vec::new();
    let m = rep.m();

    for (c, comp) in rep.components.iter().enumerate() {
        for (e, x) in comp.pool.iter().enumerate() {
            if x.len() != rep.universe {
                violations.push(Violation::WrongArity {
                    component: c,
                    example: e,
                });
            }
        }
    }

    for (e, x) in extra.iter().enumerate() {
        if rep.members(x).is_empty() {
            violations.push(Violation::Uncovered { example: e });
        }
    }

    for i in 0..m {
        for j in 0..m {
            if i == j {
                continue;
            }
            let same = rep.label(i) == rep.label(j);
            let Some(lit) = rep.phi(i, j) else {
                if !same {
                    violations.push(Violation::MissingFeature { i, j });
                }
                continue;
            };
            if same {
                violations.push(Violation::SameLabelEntry { i, j });
                continue;
            }
            if lit.feature.0 as usize >= rep.universe {
                violations.push(Violation::UnknownFeature { i, j });
                continue;
            }
            if i < j && rep.phi(j, i) != Some(lit.negate()) {
                violations.push(Violation::Antisymmetry { i, j });
            }
            for (e, x) in rep.components[i].pool.iter().enumerate() {
                if x.satisfies(lit) != Ok(true) {
                    violations.push(Violation::FailsOnFirst { i, j, example: e });
                }
            }
            for (e, x) in rep.components[j].pool.iter().enumerate() {
                if x.satisfies(lit) != Ok(false) {
                    violations.push(Violation::FailsOnSecond { i, j, example: e });
                }
            }
        }
    }

    let mut conflicts: BTreeSet<Vec<usize>> = BTreeSet::new();
    for comp in &rep.components {
        for x in &comp.pool {
            let members = rep.members(x);
            let label = rep.label(members[0]);
            if members.iter().any(|&c| rep.label(c) != label) {
                conflicts.insert(members);
            }
        }
    }
    violations.extend(
        conflicts
            .into_iter()
            .map(|components| Violation::LabelConflict { components }),
    );

    ValidationReport { violations }
}
