use std::collections::HashMap;

use crate::error::ProtocolError;

/// Maps envelope type strings to handlers, with a fallback for unknown types.
///
/// The table stores handler values of any type `H` (function pointers,
/// boxed closures, enum tags); callers decide how to invoke them. Lookup
/// is total: an unknown type resolves to the fallback.
pub struct DispatchTable<H> {
    handlers: HashMap<String, H>,
    fallback: H,
}

impl<H> DispatchTable<H> {
    pub fn new(fallback: H) -> Self {
        DispatchTable {
            handlers: HashMap::new(),
            fallback,
        }
    }

    pub fn register(&mut self, kind: &str, handler: H) -> Result<(), ProtocolError> {
        if self.handlers.contains_key(kind) {
            return Err(ProtocolError::DuplicateType(kind.to_string()));
        }
        self.handlers.insert(kind.to_string(), handler);
        Ok(())
    }

    /// The handler for `kind`, and whether it was the fallback.
    pub fn resolve(&self, kind: &str) -> (&H, bool) {
        match self.handlers.get(kind) {
            Some(h) => (h, false),
            None => (&self.fallback, true),
        }
    }

    pub fn contains(&self, kind: &str) -> bool {
        self.handlers.contains_key(kind)
    }

    pub fn registered(&self) -> impl Iterator<Item = &str> {
        self.handlers.keys().map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(_: &str) -> u32 {
        1
    }
    fn two(_: &str) -> u32 {
        2
    }
    fn fallback(_: &str) -> u32 {
        0
    }

    #[test]
    fn routes_and_falls_back() {
        let mut table: DispatchTable<fn(&str) -> u32> = DispatchTable::new(fallback);
        table.register("a.b", one).unwrap();
        table.register("c.d", two).unwrap();
        assert_eq!(table.resolve("a.b").0("x"), 1);
        assert!(!table.resolve("c.d").1);
        let (h, is_fallback) = table.resolve("zz.top");
        assert!(is_fallback);
        assert_eq!(h("x"), 0);
    }

    #[test]
    fn duplicate_rejected() {
        let mut table: DispatchTable<u8> = DispatchTable::new(0);
        table.register("a.b", 1).unwrap();
        assert_eq!(table.register("a.b", 2), Err(ProtocolError::DuplicateType("a.b".into())));
        assert_eq!(*table.resolve("a.b").0, 1);
    }
}
