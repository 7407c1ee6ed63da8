use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// A vertex of one of the built-in graph families.
///
/// Text forms: lattice points `(a,b,…)`, tree words `/1/3/2` (root `/`),
/// product vertices `[left|right]`, explicit labels as plain integers.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Vertex {
    Label(u64),
    Lattice(Vec<i64>),
    Tree(Vec<u32>),
    Pair(Box<Vertex>, Box<Vertex>),
}

impl Vertex {
    pub fn lattice(coords: &[i64]) -> Self {
        Vertex::Lattice(coords.to_vec())
    }

    pub fn z(i: i64) -> Self {
        Vertex::Lattice(vec![i])
    }

    pub fn root() -> Self {
        Vertex::Tree(Vec::new())
    }

    pub fn pair(a: Vertex, b: Vertex) -> Self {
        Vertex::Pair(Box::new(a), Box::new(b))
    }

    pub fn as_lattice(&self) -> Option<&[i64]> {
        match self {
            Vertex::Lattice(c) => Some(c),
            _ => None,
        }
    }

    pub fn as_tree(&self) -> Option<&[u32]> {
        match self {
            Vertex::Tree(w) => Some(w),
            _ => None,
        }
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Vertex::Label(l) => write!(f, "{l}"),
            Vertex::Lattice(c) => {
                f.write_str("(")?;
                for (i, x) in c.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{x}")?;
                }
                f.write_str(")")
            }
            Vertex::Tree(w) if w.is_empty() => f.write_str("/"),
            Vertex::Tree(w) => {
                for c in w {
                    write!(f, "/{c}")?;
                }
                Ok(())
            }
            Vertex::Pair(a, b) => write!(f, "[{a}|{b}]"),
        }
    }
}

impl FromStr for Vertex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut p = Parser { src: s, pos: 0 };
        let v = p.vertex()?;
        if p.pos != s.len() {
            return Err(Error::VertexSyntax(s.to_string()));
        }
        Ok(v)
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn err(&self) -> Error {
        Error::VertexSyntax(self.src.to_string())
    }

    fn peek(&self) -> Option<u8> {
        self.src.as_bytes().get(self.pos).copied()
    }

    fn eat(&mut self, b: u8) -> Result<(), Error> {
        if self.peek() == Some(b) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err())
        }
    }

    fn integer(&mut self) -> Result<i64, Error> {
        let start = self.pos;
        if self.peek() == Some(b'-') {
            self.pos += 1;
        }
        while matches!(self.peek(), Some(b'0'..=b'9')) {
            self.pos += 1;
        }
        self.src[start..self.pos].parse().map_err(|_| self.err())
    }

    fn vertex(&mut self) -> Result<Vertex, Error> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let mut coords = vec![self.integer()?];
                while self.peek() == Some(b',') {
                    self.pos += 1;
                    coords.push(self.integer()?);
                }
                self.eat(b')')?;
                Ok(Vertex::Lattice(coords))
            }
            Some(b'/') => {
                let mut word = Vec::new();
                if self.src[self.pos..].starts_with("/")
                    && !matches!(self.src.as_bytes().get(self.pos + 1), Some(b'0'..=b'9'))
                {
                    self.pos += 1;
                    return Ok(Vertex::Tree(word));
                }
                while self.peek() == Some(b'/') {
                    self.pos += 1;
                    let c = self.integer()?;
                    word.push(u32::try_from(c).map_err(|_| self.err())?);
                }
                Ok(Vertex::Tree(word))
            }
            Some(b'[') => {
                self.pos += 1;
                let a = self.vertex()?;
                self.eat(b'|')?;
                let b = self.vertex()?;
                self.eat(b']')?;
                Ok(Vertex::pair(a, b))
            }
            Some(b'0'..=b'9') => {
                let v = self.integer()?;
                Ok(Vertex::Label(v as u64))
            }
            _ => Err(self.err()),
        }
    }
}

impl serde::Serialize for Vertex {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for Vertex {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn text_forms() {
        assert_eq!(Vertex::lattice(&[1, -2]).to_string(), "(1,-2)");
        assert_eq!(Vertex::Tree(vec![1, 3, 2]).to_string(), "/1/3/2");
        assert_eq!(Vertex::root().to_string(), "/");
        assert_eq!(
            Vertex::pair(Vertex::z(0), Vertex::Tree(vec![2])).to_string(),
            "[(0)|/2]"
        );
        assert_eq!("/".parse::<Vertex>().unwrap(), Vertex::root());
        assert_eq!("7".parse::<Vertex>().unwrap(), Vertex::Label(7));
    }

    #[test]
    fn rejects_garbage() {
        for s in ["", "(", "(1,)", "[/1|", "/a", "(1)x", "[1]"] {
            assert!(s.parse::<Vertex>().is_err(), "{s}");
        }
    }

    fn arb_vertex() -> impl Strategy<Value = Vertex> {
        let leaf = prop_oneof![
            any::<u32>().prop_map(|l| Vertex::Label(l as u64)),
            prop::collection::vec(-50i64..50, 1..4).prop_map(Vertex::Lattice),
            prop::collection::vec(1u32..5, 0..6).prop_map(Vertex::Tree),
        ];
        leaf.prop_recursive(3, 8, 2, |inner| {
            (inner.clone(), inner).prop_map(|(a, b)| Vertex::pair(a, b))
        })
    }

    proptest! {
        #[test]
        fn text_round_trip(v in arb_vertex()) {
            let s = v.to_string();
            prop_assert_eq!(s.parse::<Vertex>().unwrap(), v);
        }
    }
}
