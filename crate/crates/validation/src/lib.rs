//! Reporting helper for the acceptance suite in `tests/acceptance.rs`.

use std::fmt::Display;

/// Outcome of one acceptance criterion.
#[derive(Debug, Clone, PartialEq)]
pub struct Criterion {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl Criterion {
    pub fn new(name: &'static str, pass: bool, detail: impl Into<String>) -> Self {
        Criterion { name, pass, detail: detail.into() }
    }

    pub fn error(name: &'static str, e: impl Display) -> Self {
        Self::new(name, false, format!("error: {e}"))
    }

    pub fn line(&self) -> String {
        format!("{} {}: {}", if self.pass { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

/// Prints one line per criterion and returns the names of the failures.
pub fn print_report(results: &[Criterion]) -> Vec<&'static str> {
    for r in results {
        println!("{}", r.line());
    }
    results.iter().filter(|r| !r.pass).map(|r| r.name).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_format() {
        assert_eq!(Criterion::new("x", true, "ok").line(), "PASS x: ok");
        assert_eq!(Criterion::error("y", "boom").line(), "FAIL y: error: boom");
        let r = [Criterion::new("a", true, ""), Criterion::new("b", false, "")];
        assert_eq!(print_report(&r), vec!["b"]);
    }
}
