use super::{Coefficient, PathError, PathExpression, PathKet, Segment, Spin};

struct Parser {
    chars: Vec<char>,
    pos: usize,
}

fn is_minus(c: char) -> bool {
    c == '-' || c == '−'
}

fn is_ident(c: char) -> bool {
    c.is_alphanumeric()
}

impl Parser {
    fn err<T>(&self, message: impl Into<String>) -> Result<T, PathError> {
        Err(PathError::Parse { position: self.pos, message: message.into() })
    }

    fn skip_ws(&mut self) {
        while self.chars.get(self.pos).is_some_and(|c| c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn expect(&mut self, want: impl Fn(char) -> bool, what: &str) -> Result<char, PathError> {
        match self.peek() {
            Some(c) if want(c) => {
                self.pos += 1;
                Ok(c)
            }
            Some(c) => self.err(format!("expected {what}, found `{c}`")),
            None => self.err(format!("expected {what}, found end of input")),
        }
    }

    fn sign(&mut self) -> Option<bool> {
        match self.peek() {
            Some('+') => {
                self.pos += 1;
                Some(false)
            }
            Some(c) if is_minus(c) => {
                self.pos += 1;
                Some(true)
            }
            _ => None,
        }
    }

    fn expression(&mut self) -> Result<PathExpression, PathError> {
        let first_negative = self.sign().unwrap_or(false);
        let mut terms = vec![self.term(first_negative)?];
        while self.peek().is_some() {
            match self.sign() {
                Some(neg) => terms.push(self.term(neg)?),
                None => return self.err("expected `+` or `-` between terms"),
            }
        }
        Ok(PathExpression { terms })
    }

    fn decimal(&mut self) -> Result<Option<f64>, PathError> {
        self.skip_ws();
        let start = self.pos;
        while self.chars.get(self.pos).is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if start == self.pos {
            return Ok(None);
        }
        if self.chars.get(self.pos) == Some(&'.') {
            self.pos += 1;
            let frac = self.pos;
            while self.chars.get(self.pos).is_some_and(|c| c.is_ascii_digit()) {
                self.pos += 1;
            }
            if frac == self.pos {
                return self.err("expected digits after `.`");
            }
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        text.parse().map(Some).map_err(|_| PathError::Parse { position: start, message: "bad number".into() })
    }

    fn term(&mut self, negative: bool) -> Result<PathKet, PathError> {
        let imaginary = if self.peek() == Some('i') {
            self.pos += 1;
            true
        } else {
            false
        };
        let magnitude = self.decimal()?;
        self.expect(|c| c == '|', "`|`")?;
        let mut segments = vec![self.segment()?];
        loop {
            match self.peek() {
                Some(c) if is_minus(c) => {
                    self.pos += 1;
                    segments.push(self.segment()?);
                }
                Some('>' | '⟩') => {
                    self.pos += 1;
                    break;
                }
                Some(c) => return self.err(format!("expected `-` or `>`, found `{c}`")),
                None => return self.err("unterminated ket"),
            }
        }
        let atoms = self.atom_ket()?;
        Ok(PathKet { coefficient: Coefficient { negative, imaginary, magnitude }, segments, atoms })
    }

    fn segment(&mut self) -> Result<Segment, PathError> {
        let reflected = self.peek() == Some('_');
        if reflected {
            self.pos += 1;
        }
        let label = self.ident()?;
        if reflected {
            self.expect(|c| c == '_', "closing `_`")?;
        }
        Ok(Segment { label, reflected })
    }

    fn ident(&mut self) -> Result<String, PathError> {
        self.skip_ws();
        let start = self.pos;
        while self.chars.get(self.pos).copied().is_some_and(is_ident) {
            self.pos += 1;
        }
        if start == self.pos {
            return self.err("expected a label");
        }
        Ok(self.chars[start..self.pos].iter().collect())
    }

    /// `|++>` after a path ket. A `|` followed by anything else belongs to
    /// no valid continuation, so it is reported here.
    fn atom_ket(&mut self) -> Result<Option<[Spin; 2]>, PathError> {
        if self.peek() != Some('|') {
            return Ok(None);
        }
        self.pos += 1;
        let mut spins = [Spin::Up; 2];
        for s in &mut spins {
            *s = match self.expect(|c| c == '+' || is_minus(c), "`+` or `-` in atom ket")? {
                '+' => Spin::Up,
                _ => Spin::Down,
            };
        }
        self.expect(|c| c == '>' || c == '⟩', "`>` closing atom ket")?;
        Ok(Some(spins))
    }
}

/// Parses a path expression. Error positions count characters from 0.
pub fn parse(text: &str) -> Result<PathExpression, PathError> {
    let mut p = Parser { chars: text.chars().collect(), pos: 0 };
    if p.peek().is_none() {
        return p.err("empty expression");
    }
    p.expression()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflected_segments() {
        let e = parse("|L-_S1_-A-_S2_-D>").unwrap();
        let t = &e.terms[0];
        assert_eq!(t.segments.len(), 5);
        let flags: Vec<bool> = t.segments.iter().map(|s| s.reflected).collect();
        assert_eq!(flags, [false, true, false, true, false]);
    }

    #[test]
    fn atom_ket_and_coefficients() {
        let e = parse("i0.5 |L-S1-B-S2-D> |+−> - 2|L>").unwrap();
        assert_eq!(e.terms[0].atoms, Some([Spin::Up, Spin::Down]));
        assert!(e.terms[0].coefficient.imaginary);
        assert_eq!(e.terms[0].coefficient.magnitude, Some(0.5));
        assert!(e.terms[1].coefficient.negative);
        assert_eq!(e.to_string(), "i0.5|L-S1-B-S2-D> |+-> - 2|L>");
    }

    #[test]
    fn errors_carry_positions() {
        let cases = [("|L-S1", 5), ("|L--S1>", 3), ("|L> |L>", 5), ("", 0), ("|_S1-D>", 4), ("|L> |+x>", 6), ("1.|L>", 2)];
        for (text, at) in cases {
            match parse(text) {
                Err(PathError::Parse { position, .. }) => assert_eq!(position, at, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }
}
